use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: line {line}: {message}")]
    Parse { context: String, line: usize, message: String },

    #[error("{0}: no records")]
    Empty(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{metric}: pair ({source_domain}, {target}) is unrankable: {reason}")]
    Unrankable { metric: String, source_domain: String, target: String, reason: String },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("K = {k} out of range (must be 1..={max}, i.e. at most N-1)")]
    KOutOfRange { k: usize, max: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), line, message: message.into() }
    }
}
