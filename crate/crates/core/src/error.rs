//! Error type shared by every module in this crate.

use thiserror::Error;

/// Failures surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition (shape, range, finiteness).
    #[error("validation error: {0}")]
    Validation(String),

    /// A linear system had no usable solution (zero or near-zero pivot).
    #[error("singular system: {0}")]
    Singular(String),

    /// A binary payload did not match the expected layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class: contract violations map to 1,
    /// anything involving bytes on disk maps to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Singular(_) => 1,
            Error::Format(_) | Error::Io(_) => 2,
        }
    }
}
