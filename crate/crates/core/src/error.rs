use std::io;

use thiserror::Error;

use crate::growthfit::LogisticParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or an invalid argument.
    Usage,
    /// A numerical fit could not be produced.
    Fit,
    /// Input parsed fine but cannot support the computation.
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("tail does not decay (fitted log-log slope {slope:.6} >= 0)")]
    NoDecay { slope: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient coverage: {0}")]
    Coverage(String),

    #[error("logistic fit failed after {iterations} iterations: {message} (best rss {:.6e})", best.rss())]
    FitFailure {
        message: String,
        iterations: usize,
        best: Box<LogisticParams>,
    },

    #[error("confidence estimate failed: {failed} of {total} bootstrap refits did not converge")]
    ConfidenceFailure { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::Argument(_) | Error::Io(_) => {
                ErrorKind::Usage
            }
            Error::InsufficientData(_)
            | Error::NoDecay { .. }
            | Error::FitFailure { .. }
            | Error::ConfidenceFailure { .. } => ErrorKind::Fit,
            Error::DegenerateInput(_) | Error::Coverage(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            other => Error::parse(line, format!("{other:?}")),
        }
    }
}
