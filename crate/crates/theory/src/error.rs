use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid transport plan: {0}")]
    InvalidPlan(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("simplex did not terminate after {0} pivots")]
    PivotLimit(usize),
    #[error(transparent)]
    Model(#[from] rfr_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
