//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by panel construction, estimation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input data or configuration.
    #[error("validation: {0}")]
    Validation(String),

    /// Malformed input file.
    #[error("parse error in {path}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse {
        path: String,
        line: Option<usize>,
        message: String,
    },

    /// Numerical estimation failure (missing controls, collinearity,
    /// non-convergence).
    #[error("estimation: {0}")]
    Estimation(String),

    /// A pipeline stage failed; wraps the underlying error with the stage
    /// name. The source is folded into the display, not exposed through
    /// `source()`, so error chains print it once.
    #[error("stage {stage}: {inner}")]
    Stage {
        stage: &'static str,
        inner: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            inner: Box::new(self),
        }
    }
}
