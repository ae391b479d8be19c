//! Optimal transport between the action distribution `p` and discretised shocks.
//!
//! The LP is stated in gain form:
//!
//! ```text
//! max_{pi >= 0} sum_{y,s} pi_ys eps^s_y   s.t.  sum_s pi_ys = p_y,  sum_y pi_ys = 1/S
//! ```
//!
//! Its value is `-G*(p)`. The dual is `min sum_y p_y lambda_y + (1/S) sum_s z_s` subject
//! to `lambda_y + z_s >= eps^s_y`. In cost form (`c = -eps`, minimisation) the potentials
//! are `(-lambda, -z)`, so the normalised payoff vector is
//! `w0_y = -lambda_y - (1/S) sum_s z_s`.

mod bounds;
mod simplex;

use std::io::Write;

pub use bounds::{identified_set_bounds, IdentifiedSetBounds};
pub use simplex::SimplexOptions;

use crate::error::{MtaError, Result};
use crate::shocks::DiscreteShocks;
use crate::surplus::{surplus_value, CcpVector, PayoffVector};

/// Largest supported number of support points.
pub const MAX_POINTS: usize = 200_000;
/// Largest supported number of actions.
pub const MAX_ACTIONS: usize = 50;

/// Marginal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Relative duality-gap tolerance.
pub const DUALITY_TOL: f64 = 1e-9;
/// Tolerance on `G(w0)`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Transportation problem between CCPs (rows) and shock support points (columns).
#[derive(Clone, Copy, Debug)]
pub struct TransportProblem<'a> {
    p: &'a CcpVector,
    shocks: &'a DiscreteShocks,
}

impl<'a> TransportProblem<'a> {
    pub fn new(p: &'a CcpVector, shocks: &'a DiscreteShocks) -> Result<Self> {
        if p.len() != shocks.n_actions() {
            return Err(MtaError::DimensionMismatch {
                what: "choice probabilities vs shock dimension",
                expected: shocks.n_actions(),
                got: p.len(),
            });
        }
        if shocks.n_points() > MAX_POINTS {
            return Err(MtaError::validation(
                "shocks.n_points",
                format!("{} exceeds the limit of {MAX_POINTS}", shocks.n_points()),
            ));
        }
        if shocks.n_actions() > MAX_ACTIONS {
            return Err(MtaError::validation(
                "shocks.dim",
                format!("{} exceeds the limit of {MAX_ACTIONS}", shocks.n_actions()),
            ));
        }
        let total: f64 = p.probs().iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MtaError::Infeasible(format!(
                "row marginals sum to {total}, column marginals to 1"
            )));
        }
        Ok(Self { p, shocks })
    }

    pub fn p(&self) -> &'a CcpVector {
        self.p
    }

    pub fn shocks(&self) -> &'a DiscreteShocks {
        self.shocks
    }

    /// Gain of pairing action `y` with support point `s`.
    pub fn gain(&self, y: usize, s: usize) -> f64 {
        self.shocks.point(s)[y]
    }
}

/// One basic cell of the optimal coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingEntry {
    pub action: usize,
    pub point: usize,
    pub mass: f64,
}

/// Optimal basic solution with its dual potentials.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    /// Basic cells, sorted by `(action, point)`. Zero-mass basic cells are kept.
    pub coupling: Vec<CouplingEntry>,
    /// Row potentials `lambda`.
    pub lambda: Vec<f64>,
    /// Column potentials `z`.
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Number of simplex pivots.
    pub iterations: usize,
    /// Pivots that moved no mass.
    pub degenerate_pivots: usize,
    /// True when some basic cell carries no mass (dual potentials are then not unique).
    pub basis_degenerate: bool,
}

impl TransportSolution {
    pub fn n_actions(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_points(&self) -> usize {
        self.z.len()
    }

    /// Cells with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = &CouplingEntry> + '_ {
        self.coupling.iter().filter(|e| e.mass > 0.0)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions()];
        for e in &self.coupling {
            out[e.action] += e.mass;
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_points()];
        for e in &self.coupling {
            out[e.point] += e.mass;
        }
        out
    }

    /// Dense `|Y| x S` coupling; intended for small problems.
    pub fn dense_coupling(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_points()]; self.n_actions()];
        for e in &self.coupling {
            out[e.action][e.point] += e.mass;
        }
        out
    }

    pub fn duality_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    /// Value of the conjugate surplus `G*(p)`.
    pub fn gstar(&self) -> f64 {
        -self.primal_objective
    }

    /// Writes the coupling and potentials as `record,y,s,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["record", "y", "s", "value"])?;
        for e in &self.coupling {
            w.write_record([
                "pi".to_string(),
                e.action.to_string(),
                e.point.to_string(),
                format!("{:e}", e.mass),
            ])?;
        }
        for (y, l) in self.lambda.iter().enumerate() {
            w.write_record(["lambda".to_string(), y.to_string(), String::new(), format!("{l:e}")])?;
        }
        for (s, z) in self.z.iter().enumerate() {
            w.write_record(["z".to_string(), String::new(), s.to_string(), format!("{z:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the transportation LP with default solver settings.
pub fn solve_transport(problem: &TransportProblem<'_>) -> Result<TransportSolution> {
    solve_transport_with(problem, &SimplexOptions::default())
}

pub fn solve_transport_with(
    problem: &TransportProblem<'_>,
    options: &SimplexOptions,
) -> Result<TransportSolution> {
    let p = problem.p.probs();
    let shocks = problem.shocks;
    let raw = simplex::solve(p, shocks, options)?;
    let mut primal = 0.0;
    let mut degenerate = false;
    let coupling: Vec<CouplingEntry> = raw
        .arcs
        .iter()
        .map(|&(y, s, mass)| {
            primal += mass * shocks.point(s)[y];
            degenerate |= mass <= 1e-14;
            CouplingEntry {
                action: y,
                point: s,
                mass,
            }
        })
        .collect();
    let weight = shocks.weight();
    let dual = p
        .iter()
        .zip(&raw.row_duals)
        .map(|(p, l)| p * l)
        .sum::<f64>()
        + weight * raw.col_duals.iter().sum::<f64>();
    Ok(TransportSolution {
        coupling,
        lambda: raw.row_duals,
        z: raw.col_duals,
        primal_objective: primal,
        dual_objective: dual,
        iterations: raw.pivots,
        degenerate_pivots: raw.degenerate_pivots,
        basis_degenerate: degenerate,
    })
}

/// Normalised payoffs recovered from CCPs.
#[derive(Clone, Debug)]
pub struct InversionResult {
    pub w0: PayoffVector,
    /// `G*(p)` on the discretised shocks.
    pub gstar: f64,
    /// `G(w0)` recomputed on the same shocks.
    pub surplus_residual: f64,
    pub solution: TransportSolution,
}

/// Inverts interior CCPs into the payoff vector `w0` with `G(w0) = 0`.
pub fn invert_ccp(p: &CcpVector, shocks: &DiscreteShocks) -> Result<InversionResult> {
    invert_ccp_with(p, shocks, &SimplexOptions::default())
}

pub fn invert_ccp_with(
    p: &CcpVector,
    shocks: &DiscreteShocks,
    options: &SimplexOptions,
) -> Result<InversionResult> {
    if !p.is_interior() {
        return Err(MtaError::NotInterior {
            probs: p.probs().to_vec(),
        });
    }
    let problem = TransportProblem::new(p, shocks)?;
    let solution = solve_transport_with(&problem, options)?;
    let w0 = payoffs_from_duals(&solution, shocks.weight())?;
    let surplus_residual = surplus_value(&w0, shocks)?;
    Ok(InversionResult {
        w0,
        gstar: solution.gstar(),
        surplus_residual,
        solution,
    })
}

/// `w0_y = -lambda_y - mean(z)` (gain-form potentials).
fn payoffs_from_duals(solution: &TransportSolution, weight: f64) -> Result<PayoffVector> {
    let z_mean = weight * solution.z.iter().sum::<f64>();
    PayoffVector::new(solution.lambda.iter().map(|l| -l - z_mean).collect())
}

/// `|G(w) + G*(p) - sum_y p_y w_y|`, zero exactly when `w` is a subgradient of `G*` at `p`.
pub fn fenchel_check(w: &PayoffVector, p: &CcpVector, shocks: &DiscreteShocks) -> Result<f64> {
    let problem = TransportProblem::new(p, shocks)?;
    let solution = solve_transport(&problem)?;
    let g = surplus_value(w, shocks)?;
    let pw: f64 = p.probs().iter().zip(w.as_slice()).map(|(p, w)| p * w).sum();
    Ok((g + solution.gstar() - pw).abs())
}
