use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("tangent vector of norm {norm} is outside the injectivity radius")]
    OutsideInjectivityRadius { norm: f64 },

    #[error("points are (nearly) antipodal; logarithm undefined")]
    NearAntipodal,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("inconsistent threshold verdicts: {0}")]
    InconsistentVerdicts(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
