use std::path::PathBuf;

use thiserror::Error;

use crate::model::FactorModel;

pub type Result<T> = std::result::Result<T, TomographyError>;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("data validation failed: {0}")]
    Validation(String),

    /// A NaN or infinite value appeared in an iterate. `last_finite` holds
    /// the most recent model whose entries were all finite, when one exists.
    #[error("numerical failure: {message}")]
    Numerical {
        message: String,
        last_finite: Option<Box<FactorModel>>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TomographyError {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        TomographyError::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            TomographyError::Config(_) | TomographyError::Usage(_) | TomographyError::Io(_) => 1,
            TomographyError::Shape { .. }
            | TomographyError::Parse { .. }
            | TomographyError::Validation(_) => 2,
            TomographyError::Numerical { .. } => 3,
        }
    }
}
