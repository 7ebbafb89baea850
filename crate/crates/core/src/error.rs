use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum GrooveError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio format: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("edit #{index} could not be applied: {reason}")]
    Edit { index: usize, reason: String },

    #[error("not enough data: {0}")]
    EmptyInput(String),

    #[error("series too short: {0}")]
    Length(String),

    #[error("base unit estimation did not converge after {iterations} iterations")]
    Estimation { iterations: usize },

    #[error("swing ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("malformed csv: {0}")]
    Csv(String),
}

impl GrooveError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GrooveError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for GrooveError {
    fn from(e: csv::Error) -> Self {
        GrooveError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GrooveError>;
