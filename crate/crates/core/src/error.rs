//! Crate-wide error type.
//!
//! Recoverable failures (bad files, inconsistent labels, diverging training
//! runs) surface as [`Error`]. Contract violations — calling an operation
//! with arguments its preconditions forbid — panic instead.

use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of an input file could not be decoded.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Structurally valid input that violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The claim alone does not fit the token budget.
    #[error("input too long: {0}")]
    InputTooLong(String),

    /// Training produced a non-finite loss; names the offending instance.
    #[error("non-finite loss ({value}) on instance claim_id={claim_id} doc_id={doc_id}")]
    NonFiniteLoss {
        claim_id: u64,
        doc_id: u64,
        value: f64,
    },

    /// Checkpoint file is corrupt or from an unsupported format version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }
}
