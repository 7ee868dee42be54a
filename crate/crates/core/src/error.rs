//! Crate-wide error type.
//!
//! The variants deliberately mirror how the command-line layer maps failures
//! to exit codes: configuration problems, bad data/files, numeric trouble,
//! and plain I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent tensor or sequence dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// An operation received an empty input it cannot handle.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A file did not match its declared format. `line` is 1-based.
    #[error("format error in {path} line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    /// Corpus or feature data violated an invariant.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration or arguments.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite values or other numeric failures.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
