use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the dialogue workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown slot `{slot}` in domain `{domain}`")]
    UnknownSlot { domain: String, slot: String },
    #[error("invalid dialogue act: {0}")]
    InvalidAct(String),
    #[error("action {index} is masked in domain `{domain}`")]
    MaskedAction { domain: String, index: usize },
    #[error("all actions are masked")]
    AllMasked,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("missing oracle action in sample {0}")]
    MissingOracle(usize),
    #[error("incompatible checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
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
