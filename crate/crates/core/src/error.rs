use thiserror::Error;

/// Errors raised by the library. Numerical contract violations are reported
/// rather than silently repaired.
#[derive(Debug, Error)]
pub enum CzError {
    #[error("generation {k} outside the valid range {lo}..={hi}")]
    GenerationOutOfRange { k: i64, lo: i64, hi: i64 },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CzError>;
