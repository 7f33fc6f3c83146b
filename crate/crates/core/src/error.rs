use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the decoding library.
#[derive(Debug, Error)]
pub enum AadError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported resampling ratio {fs_in} Hz -> {fs_out} Hz: {reason}")]
    UnsupportedRate { fs_in: f64, fs_out: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular system of size {dim}: about {deficiency} direction(s) without support; increase regularization")]
    Singular { dim: usize, deficiency: usize },

    #[error("ill-conditioned {what} covariance (condition number {condition:.3e}); use a stronger PCA reduction")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("target sequence is constant; Pearson correlation is undefined")]
    ConstantTarget,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        #[source]
        source: Box<AadError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl AadError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        AadError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AadError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        AadError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Wraps an error with the index of the training segment that produced it.
    pub fn in_segment(self, index: usize) -> Self {
        AadError::Segment {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = AadError> = std::result::Result<T, E>;
