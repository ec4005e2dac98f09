use std::path::PathBuf;

use thiserror::Error;

use crate::series::YearMonth;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Validation(String),

    #[error("missing month {0}")]
    MissingMonth(YearMonth),

    #[error("duplicate month {0}")]
    DuplicateMonth(YearMonth),

    #[error("{0}")]
    Range(String),

    #[error("{0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("no convergence after {iterations} iterations (best objective {best_value:e})")]
    Convergence {
        iterations: usize,
        best_value: f64,
        best_point: Vec<f64>,
    },

    #[error("misaligned series: {0}")]
    Misaligned(String),
}

impl Error {
    /// Stable machine-readable code, used as the prefix of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Parse { .. } => "E_PARSE",
            Error::Validation(_) => "E_VALIDATION",
            Error::MissingMonth(_) | Error::DuplicateMonth(_) => "E_GAP",
            Error::Range(_) => "E_RANGE",
            Error::Domain(_) => "E_DOMAIN",
            Error::InsufficientData(_) => "E_INSUFFICIENT_DATA",
            Error::DegenerateVariance(_) => "E_DEGENERATE",
            Error::Convergence { .. } => "E_CONVERGENCE",
            Error::Misaligned(_) => "E_MISALIGNED",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
