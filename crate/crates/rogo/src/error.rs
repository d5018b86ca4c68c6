//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty subspace: {0}")]
    EmptySubspace(String),
    #[error("numerical failure in {what} after {iterations} iterations")]
    Numerical { what: String, iterations: usize },
    #[error("{path}: format error at byte {offset}: {what}")]
    Format {
        path: String,
        offset: u64,
        what: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("verification failure: {0}")]
    Verification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: config problems, numerical aborts and
    /// verification failures are distinguishable by code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Numerical { .. } => 3,
            Error::Verification(_) => 4,
            _ => 1,
        }
    }
}
