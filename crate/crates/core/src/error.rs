use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed wav: {0}")]
    MalformedWav(String),

    #[error("unsupported channel count: {0}")]
    UnsupportedChannels(u16),

    #[error("unsupported wav encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("audio too short: {got} samples, need at least {need}")]
    AudioTooShort { got: usize, need: usize },

    #[error("insufficient frames: {0}")]
    InsufficientFrames(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("token stream error at byte offset {offset}: {message}")]
    Stream { offset: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: {message}")]
    Diverged { step: usize, message: String },

    #[error("corpus error on {path}: {message}")]
    Corpus { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stream(offset: usize, message: impl Into<String>) -> Self {
        Error::Stream {
            offset,
            message: message.into(),
        }
    }
}
