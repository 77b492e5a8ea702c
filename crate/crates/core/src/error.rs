//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid argument or configuration.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two vectors that must agree in length do not.
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A computation produced or received a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An input is degenerate for the requested statistic (e.g. zero variance).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Division by zero in a per-element metric, with the offending index.
    #[error("division by zero at index {index}: {context}")]
    DivisionByZero { index: usize, context: String },

    /// Malformed input file.
    #[error("parse error in {file:?} at {location}: {message}")]
    Parse {
        file: PathBuf,
        /// Byte offset for binary formats, line number for text ones.
        location: String,
        message: String,
    },

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => 2,
            Error::Parse { .. } | Error::Io { .. } => 3,
            Error::Numeric(_) | Error::DegenerateInput(_) | Error::DivisionByZero { .. } => 4,
        }
    }
}
