use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A vector whose norm is below the degeneracy threshold.
    #[error("degenerate vector: norm {norm:e} is below {epsilon:e}")]
    DegenerateVector { norm: f64, epsilon: f64 },

    /// A trace line could not be parsed or validated.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A tensor file header or payload was malformed.
    #[error("tensor format: {0}")]
    Format(String),

    /// A tensor declared more elements than the reader accepts.
    #[error("tensor too large: {elements} elements exceeds limit of {limit}")]
    Size { elements: u128, limit: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
