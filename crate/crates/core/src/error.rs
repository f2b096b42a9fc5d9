use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion failed at {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("lex error on line {line}: {reason}")]
    Lex { line: usize, reason: String },

    #[error("lex error in {file}: {source}")]
    LexFile {
        file: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation in {layer}")]
    NonFinite { layer: String },

    #[error("backward requires a forward trace; call forward with tracing enabled")]
    MissingTrace,

    #[error("unknown fragment id `{0}`")]
    UnknownFragment(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("{0}")]
    Empty(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
