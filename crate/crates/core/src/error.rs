use thiserror::Error;

/// Errors raised while building or combining lattice objects.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be positive")]
    ZeroDimension,

    #[error("negative weight {0} at {1}")]
    NegativeWeight(String, String),

    #[error("measure has empty support")]
    EmptySupport,

    #[error("total mass is {0}, expected 1")]
    NotProbability(String),

    #[error("quantile level {0} outside (0, 1]")]
    QuantileOutOfRange(String),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot parse rational {0:?}")]
    ParseRational(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
