//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("wav {path}: {reason}")]
    Wav { path: PathBuf, reason: String },

    #[error("audio: {0}")]
    Audio(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("graph: {0}")]
    Graph(String),

    #[error("manifest {path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("training: {0}")]
    Train(String),
}

impl Error {
    pub(crate) fn manifest(
        path: impl AsRef<std::path::Path>,
        line: usize,
        reason: impl Into<String>,
    ) -> Self {
        Error::Manifest {
            path: path.as_ref().to_path_buf(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            reason: reason.into(),
        }
    }

    pub(crate) fn wav(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        Error::Wav {
            path: path.as_ref().to_path_buf(),
            reason: reason.into(),
        }
    }
}
