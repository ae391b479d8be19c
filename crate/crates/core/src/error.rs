use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum MtaError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("CCP not interior: payoffs not point-identified (p = {probs:?})")]
    NotInterior { probs: Vec<f64> },

    #[error("conjugate surplus is +inf outside the simplex interior (p = {probs:?})")]
    Domain { probs: Vec<f64> },

    #[error("infeasible transport marginals: {0}")]
    Infeasible(String),

    #[error("network simplex stopped after {pivots} pivots without reaching optimality (best reduced gain {reduced_gain:e})")]
    PivotLimit { pivots: usize, reduced_gain: f64 },

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("benchmark action {action} has boundary choice probability {prob} at state {state}")]
    BenchmarkBoundary {
        state: usize,
        action: usize,
        prob: f64,
    },

    #[error("state {state}: no observations")]
    Unobserved { state: usize },

    #[error("state {state}: {source}")]
    AtState {
        state: usize,
        #[source]
        source: Box<MtaError>,
    },

    #[error("identified-set LP inconsistent with base solution: {0}")]
    InconsistentBase(String),

    #[error("malformed input rows: {}", format_rows(.0))]
    MalformedRows(Vec<(u64, String)>),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_rows(rows: &[(u64, String)]) -> String {
    rows.iter()
        .map(|(line, reason)| format!("line {line}: {reason}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl MtaError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        MtaError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn at_state(state: usize, source: MtaError) -> Self {
        MtaError::AtState {
            state,
            source: Box::new(source),
        }
    }

    /// True when the failure comes from malformed or invalid input rather than
    /// from a numerical or identification problem.
    pub fn is_input_error(&self) -> bool {
        match self {
            MtaError::Validation { .. }
            | MtaError::DimensionMismatch { .. }
            | MtaError::MalformedRows(_)
            | MtaError::Empty(_)
            | MtaError::Io(_)
            | MtaError::Csv(_) => true,
            MtaError::AtState { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            MtaError::Validation { .. } => "validation",
            MtaError::DimensionMismatch { .. } => "dimension_mismatch",
            MtaError::NotInterior { .. } => "ccp_not_interior",
            MtaError::Domain { .. } => "domain",
            MtaError::Infeasible(_) => "infeasible",
            MtaError::PivotLimit { .. } => "pivot_limit",
            MtaError::NoConvergence { .. } => "no_convergence",
            MtaError::Singular(_) => "singular",
            MtaError::BenchmarkBoundary { .. } => "benchmark_boundary",
            MtaError::Unobserved { .. } => "unobserved_state",
            MtaError::AtState { source, .. } => source.kind(),
            MtaError::InconsistentBase(_) => "inconsistent_base",
            MtaError::MalformedRows(_) => "malformed_rows",
            MtaError::Empty(_) => "empty_input",
            MtaError::Io(_) => "io",
            MtaError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, MtaError>;
