use std::path::PathBuf;

use thiserror::Error;

/// A feature that cannot be computed for one document. These never abort a
/// corpus run; extraction turns them into missing-mask bits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("need at least {needed} {unit}, found {found}")]
    TooShort {
        needed: usize,
        found: usize,
        unit: &'static str,
    },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("no verbs in document")]
    NoVerbs,
    #[error("empty text")]
    Empty,
    #[error("no value supplied")]
    NotSupplied,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("duplicate document id '{0}'")]
    DuplicateId(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("task '{task}': {message}")]
    Task { task: String, message: String },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(path: impl Into<PathBuf>, row: usize, message: impl Into<String>) -> Self {
        Error::Row {
            path: path.into(),
            row,
            message: message.into(),
        }
    }

    /// Process exit code: 1 for bad user input, 2 for broken internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
