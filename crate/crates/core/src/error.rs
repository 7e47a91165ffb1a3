use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{what} index {index} out of bounds (len {len})")]
    OutOfBounds {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("empty relation sample for relation {0}")]
    EmptyRelationSample(usize),

    #[error("degenerate relation loss {loss} for relation {relation}")]
    DegenerateLoss { relation: usize, loss: f64 },

    #[error("no eligible pairs: {0}")]
    NoEligiblePairs(&'static str),

    #[error("both classes must be present")]
    SingleClass,

    #[error("degenerate split after {0} attempts")]
    DegenerateSplit(usize),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("checkpoint format error at line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
