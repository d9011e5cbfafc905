use thiserror::Error;

/// Errors raised by the laboratory. Variants map onto the CLI exit codes:
/// domain/usage problems versus numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent q={q} outside the admissible range {range}")]
    ExponentOutOfRange { q: String, range: String },

    #[error("unknown catalog key `{0}`")]
    UnknownCatalog(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("multiplier is not finite at eigenvalue {0}")]
    NonFiniteMultiplier(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("power iteration objective decreased from {previous} to {current}")]
    NonMonotone { previous: f64, current: f64 },

    #[error("unsupported norm combination: {0}")]
    UnsupportedSpaces(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::NonMonotone { .. } | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
