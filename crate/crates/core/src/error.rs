use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate sequence id `{0}`")]
    DuplicateId(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("vocabulary fingerprint mismatch: model {model}, dataset {dataset}")]
    Fingerprint { model: String, dataset: String },

    #[error("unknown sequence id `{0}`")]
    UnknownId(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("run directory error: {0}")]
    Run(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI and HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::EmptyDataset => "empty_dataset",
            Error::Parameter(_) => "parameter",
            Error::Encoding(_) => "encoding",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Diverged { .. } => "diverged",
            Error::Fingerprint { .. } => "fingerprint",
            Error::UnknownId(_) => "unknown_id",
            Error::Checkpoint(_) => "checkpoint",
            Error::Run(_) => "run",
            Error::Json(_) => "json",
        }
    }
}
