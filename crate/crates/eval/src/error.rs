use std::path::PathBuf;

use aad_core::AadError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Core(#[from] AadError),
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("subject {subject}, {algorithm}, outer fold {fold}: {source}")]
    Fold {
        subject: String,
        algorithm: String,
        fold: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error("inner fold {fold}: {source}")]
    InnerFold {
        fold: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

impl EvalError {
    pub(crate) fn format(path: &std::path::Path, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
