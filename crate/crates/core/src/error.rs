use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("dimension mismatch: expected {expected} coefficients, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigenvalue sequence invalid: {0}")]
    InvalidEigenvalues(String),

    #[error("effective eigenvalue {value} at mode {index} is not positive; 0 is not in the resolvent set")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("generator is not exponentially stable (growth bound {growth_bound})")]
    Unstable { growth_bound: f64 },

    #[error("exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),

    #[error("control operator regularity check failed: {0}")]
    Regularity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("unknown claim '{claim}' for scenario '{scenario}'")]
    UnknownClaim { scenario: String, claim: String },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
