//! Error types shared across the crate.

use std::path::PathBuf;

/// Coarse error category used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller misuse: bad flags, invalid configuration.
    Usage,
    /// Problems with input data: unreadable files, malformed records.
    Data,
    /// Bugs and unexpected internal states.
    Internal,
}

impl ErrorClass {
    /// Process exit code for this class.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Internal => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("trajectory {trajectory} (line {line}): {reason}")]
    MalformedRecord {
        trajectory: usize,
        line: usize,
        reason: String,
    },

    #[error("malformed library file {path}: {reason}")]
    MalformedLibrary { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("clustering needs at least {needed} distinct actions, found {found}")]
    InsufficientDistinctActions { needed: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("span [{start}, {start}+{length}) out of range for trajectory of length {available}")]
    SpanOutOfRange {
        start: usize,
        length: usize,
        available: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::Read { .. }
            | Error::Write { .. }
            | Error::EmptyDataset
            | Error::MalformedRecord { .. }
            | Error::MalformedLibrary { .. }
            | Error::InsufficientDistinctActions { .. }
            | Error::DimensionMismatch { .. } => ErrorClass::Data,
            Error::SpanOutOfRange { .. } | Error::Internal(_) => ErrorClass::Internal,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
