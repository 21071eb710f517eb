use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (shapes, indices, probability vectors).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A resource guard refused to run an enumeration or dense allocation.
    #[error("resource guard: {0}")]
    Guard(String),
    /// Recovery could not produce exactly `q` columns.
    #[error("recovery failed: {0}")]
    RecoveryFailed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn guard<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Guard(msg.into()))
}
