use std::path::PathBuf;

use aad_core::AadError;
use aad_eval::EvalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config { .. } => 1,
            Self::Data(_) | Self::Io { .. } => 2,
            Self::Internal(_) => 3,
        }
    }
}

impl From<AadError> for CliError {
    fn from(e: AadError) -> Self {
        match e {
            AadError::InvalidParameter { .. } => Self::Usage(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) | EvalError::UnknownAlgorithm(_) => Self::Usage(e.to_string()),
            EvalError::Core(c) => c.into(),
            other => Self::Data(other.to_string()),
        }
    }
}
