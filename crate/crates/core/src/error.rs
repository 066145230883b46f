use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("code digest mismatch: expected {expected:016x}, found {found:016x}")]
    DigestMismatch { expected: u64, found: u64 },
    #[error("reports are not comparable: {0}")]
    Incompatible(String),
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
