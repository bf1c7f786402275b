use std::path::PathBuf;

/// Error type shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("non-finite sample encountered: {0}")]
    NonFinite(String),
    #[error("label file {path}: {message}")]
    Label { path: PathBuf, message: String },
    #[error("wav file {path}: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("model file {path}: {message}")]
    ModelFile { path: PathBuf, message: String },
    #[error("unknown model kind {0:?}")]
    UnknownModelKind(String),
    #[error("condition error: {0}")]
    Condition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
