use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "enumeration of 2^{bits} sign vectors exceeds the exact-mode cap 2^{cap_bits}; use Monte Carlo mode"
    )]
    EnumerationTooLarge { bits: usize, cap_bits: usize },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
