use std::path::PathBuf;

use thiserror::Error;

use crate::dataio::Group;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A named column is absent from the input, or the schema is inconsistent.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input values violate a domain invariant (non-binary label, bad weight, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample of size {requested} requested from a pool of {available} rows")]
    SampleSize { requested: usize, available: usize },

    #[error("group {group} has {available} eligible rows, {needed} needed (short by {})", needed - available)]
    Shortfall {
        group: String,
        needed: usize,
        available: usize,
    },

    #[error("infeasible outcome rate {rate} for group {group}: {reason}")]
    InfeasibleRate {
        group: Group,
        rate: f64,
        reason: String,
    },

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("metric mismatch: {0} vs {1}")]
    MetricMismatch(String, String),

    #[error("quantity is undefined: {0}")]
    Undefined(String),

    #[error("malformed table at row {row}, column {column}: {message}")]
    Table {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input rather than by a failing run. A
    /// protocol that asks for more rows than the data holds counts as bad
    /// input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Validation(_)
                | Error::Config(_)
                | Error::SampleSize { .. }
                | Error::Shortfall { .. }
                | Error::InfeasibleRate { .. }
                | Error::Table { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
