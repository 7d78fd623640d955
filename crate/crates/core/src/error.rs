use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported audio encoding in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    /// Every analysis frame of the clip sits below the silence gate.
    #[error("clip '{0}' is entirely silent")]
    EmptyClip(String),

    #[error("clip '{id}' is shorter than one analysis window ({needed} samples)")]
    EmptyTrack { id: String, needed: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("no usable frames for functional over '{0}'")]
    MissingFunctional(String),

    #[error("utterance '{id}' is unusable: {reason}")]
    Unusable { id: String, reason: String },

    #[error("join failed: {0}")]
    Join(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("regression is underdetermined: {samples} samples for {dims} predictors")]
    Underdetermined { samples: usize, dims: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Csv(e) if e.is_io_error() => ErrorKind::Io,
            Error::Underdetermined { .. } | Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}
