use std::path::PathBuf;

use thiserror::Error;

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

    #[error("{path}:{line}: rating {value} outside [1, 5]")]
    RatingOutOfRange {
        path: PathBuf,
        line: usize,
        value: f64,
    },

    #[error("{path}: duplicate rating for user {user:?} item {item:?} on lines {first_line} and {second_line}")]
    DuplicateRating {
        path: PathBuf,
        user: String,
        item: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("{path}: no interactions")]
    NoInteractions { path: PathBuf },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("{algorithm}: unknown hyperparameter {key:?}")]
    UnknownHyperparameter { algorithm: String, key: String },

    #[error("{algorithm}: hyperparameter {key:?}: {message}")]
    InvalidHyperparameter {
        algorithm: String,
        key: String,
        message: String,
    },

    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),

    #[error("{model}: non-finite parameter after epoch {epoch}")]
    Diverged { model: String, epoch: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input (files, configs, arguments) rather
    /// than a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Diverged { .. } | Error::Json(_) => false,
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
