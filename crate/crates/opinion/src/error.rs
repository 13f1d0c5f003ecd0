use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("strip widths do not partition the grid: n + m + 2k = {} + {} + 2*{} != N = {side}", .n, .m, .k)]
    Partition {
        n: usize,
        m: usize,
        k: usize,
        side: usize,
    },
    #[error("modelling assumption violated: {0}")]
    Assumption(String),
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("resource guard: {0}")]
    Guard(String),
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("no reduction within the recurrence budget: {0}")]
    Falsified(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
