//! Mass transport estimation of dynamic discrete choice models.
//!
//! Conditional choice probabilities are inverted into normalised choice-specific
//! values by solving an optimal transport problem between actions and a discretised
//! shock distribution; flow payoffs then follow from a linear system in the ex-ante
//! value function.

pub mod dataio;
pub mod ddc;
pub mod error;
pub mod montecarlo;
pub mod shocks;
pub mod surplus;
pub mod transport;

pub use error::{MtaError, Result};
pub use shocks::{derive_seed, discretize, DiscreteShocks, ShockSpec, StateShocks};
pub use surplus::{
    argmax_choice, choice_probs, logit_gstar, logit_oracle_w0, surplus_value, CcpVector,
    PayoffVector, EULER_GAMMA,
};
pub use transport::{
    fenchel_check, identified_set_bounds, invert_ccp, solve_transport, IdentifiedSetBounds,
    InversionResult, TransportProblem, TransportSolution,
};
