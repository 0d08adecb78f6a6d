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

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: label value {value:?} does not map onto {{0, 1}}")]
    UnmappableLabel {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("annotation vote list is empty")]
    EmptyVotes,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training set contains a single class ({0:?}); both classes are required")]
    SingleClass(crate::Label),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("cannot reach backend at {endpoint}: {message}")]
    Connection { endpoint: String, message: String },

    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },

    #[error("protocol violation from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },

    #[error("backend at {endpoint} answered {status}: {message}")]
    BackendStatus {
        endpoint: String,
        status: u16,
        message: String,
    },

    #[error("translation of texts {start}..{end} failed: {message}")]
    Translation {
        start: usize,
        end: usize,
        message: String,
    },

    #[error("malformed model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that originate in a remote backend or its wire
    /// protocol rather than in local data.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::Connection { .. }
                | Error::Timeout { .. }
                | Error::Protocol { .. }
                | Error::BackendStatus { .. }
                | Error::Translation { .. }
        )
    }
}
