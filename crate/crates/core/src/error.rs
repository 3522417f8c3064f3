//! Error type shared across the pipeline.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by any stage of the quality pipeline.
#[derive(Debug, Error)]
pub enum AvqError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest row {row}: invalid field `{field}`: {message}")]
    Manifest {
        row: usize,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{context}: dimension mismatch (expected {expected}, got {actual})")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("media error in {path}: {message}")]
    Media { path: PathBuf, message: String },

    #[error("non-finite value at {location}")]
    NonFinite { location: String },

    #[error("training failed at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for AvqError {
    fn from(err: serde_json::Error) -> Self {
        AvqError::Serialization(err.to_string())
    }
}

impl AvqError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AvqError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn media(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AvqError::Media {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn dimension(
        context: impl Into<String>,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        AvqError::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, AvqError>;
