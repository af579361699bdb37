use thiserror::Error;

/// Errors shared by the statistics, model and sampler layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample")]
    EmptySample,

    #[error("all-zero weight vector")]
    AllZeroWeights,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no acceptance for block {block} within {attempts} attempts")]
    BudgetExceeded { block: usize, attempts: u64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("model does not provide {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
