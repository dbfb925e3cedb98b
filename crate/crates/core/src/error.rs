use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by signal generation, analysis and I/O.
#[derive(Debug, Error)]
pub enum FvnError {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("alignment mismatch: {0}")]
    Alignment(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FvnError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        FvnError::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FvnError>;
