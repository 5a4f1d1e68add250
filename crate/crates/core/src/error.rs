use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based.
    #[error("{path}: {message} at line {line}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("duplicate id {0}")]
    DuplicateId(i64),

    #[error("duplicate name {0:?}")]
    DuplicateName(String),

    #[error("unknown id {0}")]
    UnknownId(i64),

    #[error("unknown name {0:?}")]
    UnknownName(String),

    #[error("zero-norm vector for id {0}")]
    ZeroNorm(i64),

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("override rejected: {0}")]
    Override(String),

    #[error("resampling replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("provider error for {subject:?}: {message}")]
    Provider {
        subject: String,
        message: String,
        retryable: bool,
    },

    #[error("coverage incomplete after {rounds} rounds; untagged: {residual:?}")]
    Coverage { rounds: usize, residual: Vec<String> },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
