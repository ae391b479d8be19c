//! Dynamic discrete choice: forward solution by value iteration and the two-step
//! estimator (per-state CCP inversion, then a linear solve for the ex-ante value).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MtaError, Result};
use crate::shocks::{DiscreteShocks, ShockSpec, StateShocks};
use crate::surplus::{choice_probs, surplus_value, CcpVector, PayoffVector};
use crate::transport::{identified_set_bounds, invert_ccp_with, IdentifiedSetBounds, SimplexOptions};

const ROW_TOL: f64 = 1e-12;

/// Default stopping tolerance for value iteration.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for value iteration.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Square transition kernel `Pr(x' | x)` for one action, stored row-major.
///
/// A row of zeros marks a state where the kernel is unknown (no observed transitions).
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(MtaError::DimensionMismatch {
                    what: "transition row",
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Self::new(n, data)
    }

    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(MtaError::validation("transitions", "need at least one state"));
        }
        if data.len() != n * n {
            return Err(MtaError::DimensionMismatch {
                what: "transition matrix entries",
                expected: n * n,
                got: data.len(),
            });
        }
        for (x, row) in data.chunks_exact(n).enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(MtaError::validation(
                    format!("transitions[{x}]"),
                    "entries must be nonnegative",
                ));
            }
            let total: f64 = row.iter().sum();
            if total != 0.0 && (total - 1.0).abs() > ROW_TOL {
                return Err(MtaError::validation(
                    format!("transitions[{x}]"),
                    format!("row sums to {total}"),
                ));
            }
        }
        Ok(Self { n, data })
    }

    /// Identity kernel (every state absorbing).
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for x in 0..n {
            data[x * n + x] = 1.0;
        }
        Self { n, data }
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn get(&self, x: usize, next: usize) -> f64 {
        self.data[x * self.n + next]
    }

    pub fn is_row_missing(&self, x: usize) -> bool {
        self.row(x).iter().all(|v| *v == 0.0)
    }

    pub fn is_complete(&self) -> bool {
        (0..self.n).all(|x| !self.is_row_missing(x))
    }

    /// `sum_{x'} Pr(x' | x) v(x')` over reachable `x'`, so undefined values at
    /// unreachable states do not leak in.
    pub fn expect(&self, x: usize, v: &[f64]) -> f64 {
        self.row(x)
            .iter()
            .zip(v)
            .filter(|(p, _)| **p != 0.0)
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// A dynamic discrete choice model with known primitives.
#[derive(Clone, Debug)]
pub struct DdcModel {
    pub beta: f64,
    /// `transitions[y]` is the kernel under action `y`.
    pub transitions: Vec<TransitionMatrix>,
    /// `flows[y][x]` is the flow utility of action `y` at state `x`.
    pub flows: Vec<Vec<f64>>,
    pub shocks: ShockSpec,
    /// Action whose flow utility is normalised to zero.
    pub benchmark: usize,
}

impl DdcModel {
    pub fn new(
        beta: f64,
        transitions: Vec<TransitionMatrix>,
        flows: Vec<Vec<f64>>,
        shocks: ShockSpec,
        benchmark: usize,
    ) -> Result<Self> {
        let model = Self {
            beta,
            transitions,
            flows,
            shocks,
            benchmark,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.transitions.first().map_or(0, |t| t.n_states())
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        let ny = self.n_actions();
        if ny == 0 {
            return Err(MtaError::validation("transitions", "need at least one action"));
        }
        let nx = self.n_states();
        for (y, t) in self.transitions.iter().enumerate() {
            if t.n_states() != nx {
                return Err(MtaError::DimensionMismatch {
                    what: "transition matrix size",
                    expected: nx,
                    got: t.n_states(),
                });
            }
            if !t.is_complete() {
                return Err(MtaError::validation(
                    format!("transitions[{y}]"),
                    "every row must be a probability distribution",
                ));
            }
        }
        if self.flows.len() != ny {
            return Err(MtaError::DimensionMismatch {
                what: "flow utility actions",
                expected: ny,
                got: self.flows.len(),
            });
        }
        for row in &self.flows {
            if row.len() != nx {
                return Err(MtaError::DimensionMismatch {
                    what: "flow utility states",
                    expected: nx,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MtaError::validation("flows", "entries must be finite"));
            }
        }
        if self.benchmark >= ny {
            return Err(MtaError::validation(
                "benchmark",
                format!("action {} out of range for {ny} actions", self.benchmark),
            ));
        }
        if self.shocks.dimension() != ny {
            return Err(MtaError::DimensionMismatch {
                what: "shock dimension",
                expected: ny,
                got: self.shocks.dimension(),
            });
        }
        Ok(())
    }

    /// `w_y(x) = u_y(x) + beta * E[V(x') | x, y]`.
    pub fn choice_values(&self, v: &[f64]) -> Vec<Vec<f64>> {
        self.transitions
            .iter()
            .zip(&self.flows)
            .map(|(t, u)| {
                (0..self.n_states())
                    .map(|x| u[x] + self.beta * t.expect(x, v))
                    .collect()
            })
            .collect()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(MtaError::validation("beta", format!("must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

fn check_state_shocks(shocks: &StateShocks, nx: usize, ny: usize) -> Result<()> {
    if shocks.n_states() != nx {
        return Err(MtaError::DimensionMismatch {
            what: "shock discretizations per state",
            expected: nx,
            got: shocks.n_states(),
        });
    }
    for x in 0..nx {
        if shocks.at(x).n_actions() != ny {
            return Err(MtaError::DimensionMismatch {
                what: "shock dimension",
                expected: ny,
                got: shocks.at(x).n_actions(),
            });
        }
    }
    Ok(())
}

fn column(values: &[Vec<f64>], x: usize) -> PayoffVector {
    PayoffVector::new(values.iter().map(|row| row[x]).collect()).expect("finite values")
}

/// Fixed point of the Bellman operator on discretised shocks.
#[derive(Clone, Debug)]
pub struct ModelSolution {
    /// Ex-ante value `V(x)`.
    pub values: Vec<f64>,
    /// Choice-specific values `w[y][x]`.
    pub w: Vec<Vec<f64>>,
    pub ccp: Vec<CcpVector>,
    /// `max_x |G(w(x); x) - V(x)|` at the returned values.
    pub bellman_residual: f64,
    pub iterations: usize,
}

/// Value iteration from `V = 0` until successive iterates differ by at most `tol`.
pub fn solve_model(
    model: &DdcModel,
    shocks: &StateShocks,
    tol: f64,
    max_iter: usize,
) -> Result<ModelSolution> {
    model.validate()?;
    if !(tol > 0.0) {
        return Err(MtaError::validation("tol", "must be positive"));
    }
    let nx = model.n_states();
    check_state_shocks(shocks, nx, model.n_actions())?;
    let bellman = |v: &[f64]| -> Vec<f64> {
        let w = model.choice_values(v);
        (0..nx)
            .into_par_iter()
            .map(|x| surplus_value(&column(&w, x), shocks.at(x)).expect("dimensions checked"))
            .collect()
    };
    let mut v = vec![0.0; nx];
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let next = bellman(&v);
        residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if residual <= tol {
            let w = model.choice_values(&v);
            let g = bellman(&v);
            let bellman_residual = g.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let ccp = (0..nx)
                .map(|x| choice_probs(&column(&w, x), shocks.at(x)))
                .collect::<Result<Vec<_>>>()?;
            return Ok(ModelSolution {
                values: v,
                w,
                ccp,
                bellman_residual,
                iterations: iteration,
            });
        }
    }
    Err(MtaError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

fn check_diagonal_dominance(t: &TransitionMatrix, beta: f64, states: &[usize]) -> Result<()> {
    for &x in states {
        let diag = (1.0 - beta * t.get(x, x)).abs();
        let off: f64 = states
            .iter()
            .filter(|&&k| k != x)
            .map(|&k| beta * t.get(x, k))
            .sum();
        if !(diag > off) {
            return Err(MtaError::Singular(format!(
                "I - beta*P is not strictly diagonally dominant at state {x}"
            )));
        }
    }
    Ok(())
}

/// Solves `(beta * P0 - I) V = W` over the given states by LU with partial pivoting.
/// Rows of `P0` must only reach states in `states`.
fn solve_values(w: &[f64], trans0: &TransitionMatrix, beta: f64, states: &[usize]) -> Result<(Vec<f64>, f64)> {
    let m = states.len();
    check_diagonal_dominance(trans0, beta, states)?;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &x) in states.iter().enumerate() {
        for (j, &k) in states.iter().enumerate() {
            a[(i, j)] = beta * trans0.get(x, k) - if i == j { 1.0 } else { 0.0 };
        }
    }
    let b = DVector::from_iterator(m, states.iter().map(|&x| w[x]));
    let v = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| MtaError::Singular("LU factorisation failed".into()))?;
    let residual = (&a * &v - &b).amax();
    Ok((v.iter().copied().collect(), residual))
}

/// Ex-ante values from the benchmark payoffs: `V = (beta * P0 - I)^{-1} W`.
pub fn ex_ante_values(w: &[f64], trans0: &TransitionMatrix, beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let n = trans0.n_states();
    if w.len() != n {
        return Err(MtaError::DimensionMismatch {
            what: "benchmark payoffs",
            expected: n,
            got: w.len(),
        });
    }
    if let Some(x) = (0..n).find(|&x| trans0.is_row_missing(x)) {
        return Err(MtaError::Singular(format!("benchmark transition row {x} is empty")));
    }
    let states: Vec<usize> = (0..n).collect();
    Ok(solve_values(w, trans0, beta, &states)?.0)
}

/// `u_y(x) = w0_y(x) + V(x) - beta * E[V(x') | x, y]`.
pub fn utility_flows(
    w0: &[Vec<f64>],
    v: &[f64],
    transitions: &[TransitionMatrix],
    beta: f64,
) -> Result<Vec<Vec<f64>>> {
    if w0.len() != transitions.len() {
        return Err(MtaError::DimensionMismatch {
            what: "actions in payoffs vs transitions",
            expected: transitions.len(),
            got: w0.len(),
        });
    }
    let nx = v.len();
    for (row, t) in w0.iter().zip(transitions) {
        if row.len() != nx || t.n_states() != nx {
            return Err(MtaError::DimensionMismatch {
                what: "states in payoffs, values and transitions",
                expected: nx,
                got: row.len().max(t.n_states()),
            });
        }
    }
    Ok(w0
        .iter()
        .zip(transitions)
        .map(|(row, t)| (0..nx).map(|x| row[x] + v[x] - beta * t.expect(x, v)).collect())
        .collect())
}

/// Treatment of states whose data cannot support the benchmark equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnusableStatePolicy {
    /// Fail on an unvisited state or a benchmark probability of 0 or 1.
    #[default]
    Error,
    /// Drop such states, and every state whose benchmark transitions reach them.
    Exclude,
}

/// Why a state's flow utilities are or are not reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateStatus {
    /// Interior CCPs; flows are point estimates.
    Identified,
    /// Some action has probability 0 or 1; the state enters the value system when its
    /// benchmark probability is positive, but its flows are withheld.
    BoundaryCcp,
    /// No choice or transition data at the state.
    Unobserved,
    /// Dropped because its transitions reach states without usable data.
    Pruned,
}

impl StateStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateStatus::Identified => "identified",
            StateStatus::BoundaryCcp => "boundary_ccp",
            StateStatus::Unobserved => "unobserved",
            StateStatus::Pruned => "pruned",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EstimationOptions {
    pub with_bounds: bool,
    pub policy: UnusableStatePolicy,
    pub simplex: SimplexOptions,
}

/// Output of the two-step estimator. Entries that are not identified hold `NaN`.
#[derive(Clone, Debug)]
pub struct EstimationResult {
    /// Normalised payoffs `w0[y][x]`.
    pub w0: Vec<Vec<f64>>,
    /// Ex-ante values `V(x)`.
    pub values: Vec<f64>,
    /// Flow utilities `flows[y][x]`.
    pub flows: Vec<Vec<f64>>,
    pub status: Vec<StateStatus>,
    /// Per-state bounds on `w0`, present for identified states when requested.
    pub bounds: Option<Vec<Option<IdentifiedSetBounds>>>,
    /// `max |(beta P0 - I) V - W|` of the second-step solve.
    pub linear_residual: f64,
    pub benchmark: usize,
}

impl EstimationResult {
    pub fn identified_states(&self) -> Vec<usize> {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == StateStatus::Identified)
            .map(|(x, _)| x)
            .collect()
    }

    pub fn n_states(&self) -> usize {
        self.status.len()
    }

    pub fn n_actions(&self) -> usize {
        self.flows.len()
    }

    /// Rows `x,y,w0,flow,lower,upper,identified`; missing numbers are empty fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["x", "y", "w0", "flow", "lower", "upper", "identified", "status"])?;
        let num = |v: f64| if v.is_finite() { format!("{v:.12e}") } else { String::new() };
        for x in 0..self.n_states() {
            let b = self.bounds.as_ref().and_then(|b| b[x].as_ref());
            for y in 0..self.n_actions() {
                out.write_record([
                    x.to_string(),
                    y.to_string(),
                    num(self.w0[y][x]),
                    num(self.flows[y][x]),
                    b.map_or(String::new(), |b| num(b.lower[y])),
                    b.map_or(String::new(), |b| num(b.upper[y])),
                    (self.status[x] == StateStatus::Identified).to_string(),
                    self.status[x].as_str().to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

struct StateInversion {
    w0: Vec<f64>,
    bounds: Option<IdentifiedSetBounds>,
}

/// Inverts the CCPs at one state, restricting to the actions with positive
/// probability when some probability is zero.
fn invert_state(
    p: &CcpVector,
    shocks: &DiscreteShocks,
    options: &EstimationOptions,
) -> Result<StateInversion> {
    let ny = p.len();
    if p.is_interior() {
        let inv = invert_ccp_with(p, shocks, &options.simplex)?;
        let bounds = if options.with_bounds {
            Some(identified_set_bounds(p, shocks, &inv.solution)?)
        } else {
            None
        };
        return Ok(StateInversion {
            w0: inv.w0.into_inner(),
            bounds,
        });
    }
    let support = p.support();
    let local_p = p.restrict(&support)?;
    let local_shocks = shocks.restrict_actions(&support)?;
    let local = invert_ccp_with(&local_p, &local_shocks, &options.simplex)?;
    let mut w0 = vec![f64::NAN; ny];
    for (k, &y) in support.iter().enumerate() {
        w0[y] = local.w0[k];
    }
    Ok(StateInversion { w0, bounds: None })
}

/// Two-step estimator: invert CCPs state by state, then recover `V` from the benchmark
/// payoffs and flow utilities from the choice-specific payoffs.
pub fn estimate(
    ccps: &[Option<CcpVector>],
    transitions: &[TransitionMatrix],
    beta: f64,
    shocks: &StateShocks,
    y0: usize,
    options: &EstimationOptions,
) -> Result<EstimationResult> {
    check_beta(beta)?;
    let nx = ccps.len();
    let ny = transitions.len();
    if nx == 0 {
        return Err(MtaError::Empty("no states".into()));
    }
    if y0 >= ny {
        return Err(MtaError::validation(
            "benchmark",
            format!("action {y0} out of range for {ny} actions"),
        ));
    }
    for t in transitions {
        if t.n_states() != nx {
            return Err(MtaError::DimensionMismatch {
                what: "transition matrix size",
                expected: nx,
                got: t.n_states(),
            });
        }
    }
    for p in ccps.iter().flatten() {
        if p.len() != ny {
            return Err(MtaError::DimensionMismatch {
                what: "choice probabilities",
                expected: ny,
                got: p.len(),
            });
        }
    }
    check_state_shocks(shocks, nx, ny)?;
    let exclude = options.policy == UnusableStatePolicy::Exclude;
    let trans0 = &transitions[y0];

    // States able to contribute a benchmark payoff.
    let mut status = vec![StateStatus::Identified; nx];
    let mut usable = vec![true; nx];
    for x in 0..nx {
        let unobserved = ccps[x].is_none() || trans0.is_row_missing(x);
        if unobserved {
            if !exclude {
                return Err(MtaError::Unobserved { state: x });
            }
            status[x] = StateStatus::Unobserved;
            usable[x] = false;
            continue;
        }
        let p = ccps[x].as_ref().expect("observed");
        let p0 = p[y0];
        if p0 <= 0.0 || p0 >= 1.0 {
            if !exclude {
                return Err(MtaError::BenchmarkBoundary {
                    state: x,
                    action: y0,
                    prob: p0,
                });
            }
            status[x] = StateStatus::BoundaryCcp;
            usable[x] = p0 > 0.0;
        } else if !p.is_interior() {
            status[x] = StateStatus::BoundaryCcp;
        }
    }
    // Close the retained set under benchmark transitions.
    loop {
        let mut changed = false;
        for x in 0..nx {
            if usable[x] && trans0.row(x).iter().enumerate().any(|(k, p)| *p > 0.0 && !usable[k]) {
                usable[x] = false;
                if status[x] != StateStatus::Unobserved {
                    status[x] = StateStatus::Pruned;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let retained: Vec<usize> = (0..nx).filter(|&x| usable[x]).collect();
    if retained.is_empty() {
        return Err(MtaError::Empty("no state has usable benchmark data".into()));
    }

    let inversions: Vec<Option<StateInversion>> = (0..nx)
        .into_par_iter()
        .map(|x| {
            if !usable[x] {
                return Ok(None);
            }
            let p = ccps[x].as_ref().expect("usable states are observed");
            invert_state(p, shocks.at(x), options)
                .map(Some)
                .map_err(|e| MtaError::at_state(x, e))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w0 = vec![vec![f64::NAN; nx]; ny];
    let mut bench = vec![0.0; nx];
    for (x, inv) in inversions.iter().enumerate() {
        if let Some(inv) = inv {
            for y in 0..ny {
                w0[y][x] = inv.w0[y];
            }
            bench[x] = inv.w0[y0];
        }
    }
    let (v_retained, linear_residual) = solve_values(&bench, trans0, beta, &retained)?;
    let mut values = vec![f64::NAN; nx];
    for (&x, v) in retained.iter().zip(v_retained) {
        values[x] = v;
    }

    let mut flows = vec![vec![f64::NAN; nx]; ny];
    for &x in &retained {
        if status[x] != StateStatus::Identified {
            continue;
        }
        let reaches_unknown = transitions.iter().any(|t| {
            t.is_row_missing(x) || t.row(x).iter().enumerate().any(|(k, p)| *p > 0.0 && !usable[k])
        });
        if reaches_unknown {
            status[x] = StateStatus::Pruned;
            continue;
        }
        for y in 0..ny {
            flows[y][x] = w0[y][x] + values[x] - beta * transitions[y].expect(x, &values);
        }
    }
    let bounds = options.with_bounds.then(|| {
        inversions
            .into_iter()
            .enumerate()
            .map(|(x, inv)| {
                inv.and_then(|i| i.bounds)
                    .filter(|_| status[x] == StateStatus::Identified)
            })
            .collect()
    });
    Ok(EstimationResult {
        w0,
        values,
        flows,
        status,
        bounds,
        linear_residual,
        benchmark: y0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_with_zero_discount_negate_payoffs() {
        let t = TransitionMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap();
        let v = ex_ante_values(&[1.5, -2.0], &t, 0.0).unwrap();
        assert_eq!(v, vec![-1.5, 2.0]);
    }

    #[test]
    fn values_with_identity_kernel() {
        let v = ex_ante_values(&[1.0, 1.0], &TransitionMatrix::identity(2), 0.9).unwrap();
        for x in v {
            assert!((x + 10.0).abs() < 1e-12);
        }
        let zero = ex_ante_values(&[0.0, 0.0], &TransitionMatrix::identity(2), 0.9).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn flows_with_zero_values_equal_payoffs() {
        let t = vec![TransitionMatrix::identity(2), TransitionMatrix::identity(2)];
        let w0 = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(utility_flows(&w0, &[0.0, 0.0], &t, 0.9).unwrap(), w0);
    }

    #[test]
    fn rejects_bad_rows_and_beta() {
        assert!(TransitionMatrix::from_rows(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(TransitionMatrix::from_rows(vec![vec![-0.1, 1.1], vec![0.0, 1.0]]).is_err());
        let t = TransitionMatrix::identity(1);
        assert!(ex_ante_values(&[1.0], &t, 1.0).is_err());
    }

    #[test]
    fn empty_row_marks_missing_data() {
        let t = TransitionMatrix::from_rows(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(t.is_row_missing(0) && !t.is_row_missing(1));
        assert!(matches!(ex_ante_values(&[0.0, 0.0], &t, 0.5), Err(MtaError::Singular(_))));
    }

    #[test]
    fn static_model_needs_no_continuation() {
        let shocks = DiscreteShocks::from_rows(vec![vec![0.3, -0.1], vec![-0.4, 0.2]]).unwrap();
        let model = DdcModel::new(
            0.0,
            vec![TransitionMatrix::identity(2); 2],
            vec![vec![0.5, -1.0], vec![0.0, 0.0]],
            ShockSpec::gumbel(2),
            1,
        )
        .unwrap();
        let sol = solve_model(&model, &StateShocks::shared(shocks.clone(), 2), 1e-12, 10).unwrap();
        for x in 0..2 {
            let g = surplus_value(&column(&model.flows, x), &shocks).unwrap();
            assert_eq!(sol.values[x], g);
        }
    }
}
