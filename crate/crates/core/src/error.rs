//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the light-field toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Array dimensions do not satisfy an operation's contract.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument is out of range or otherwise invalid.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// A scene directory, metadata file, or image is malformed.
    #[error("scene format error: {0}")]
    SceneFormat(String),

    /// Checkpoint archive is corrupt, incompatible, or mismatched.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training aborted (non-finite loss or inconsistent data).
    #[error("training error: {0}")]
    Train(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<String>, source: image::ImageError) -> Self {
        Error::Image { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
