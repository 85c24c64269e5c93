use std::io;

use thiserror::Error;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid parameters or configuration.
    Usage,
    /// Missing, malformed or inconsistent input data.
    Data,
    /// Non-finite values or divergence during optimization.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    CoordinateRange { lat: f64, lon: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} id {id} out of range (size {size})")]
    IdOutOfRange {
        what: &'static str,
        id: usize,
        size: usize,
    },

    #[error("record {id}: no skills and no curated skill list for its title")]
    UnresolvableSkills { id: String },

    #[error("record {id}: title {title:?} has no embedding")]
    UnknownTitle { id: String, title: String },

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("unknown id {0}")]
    UnknownId(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cannot sample triplets: {0}")]
    Sampling(String),

    #[error("insufficient training sample: need at least {needed} vectors, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("bad file format: {0}")]
    Format(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::Divergence { .. } | Error::ZeroVector => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn record(line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
