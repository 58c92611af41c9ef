use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported model format version {found:?} (expected {expected:?})")]
    Version { found: String, expected: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("partition: {0}")]
    Partition(String),

    #[error("measurer {measure:?} failed on sample {sample:?}: {message}")]
    Measure {
        measure: String,
        sample: String,
        message: String,
    },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no random index for matrix order {order}; supported orders are 1..={max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    // The cause is part of the message rather than the source chain, so
    // chain-printing reporters do not repeat it.
    #[error("stage {stage} failed: {cause}")]
    Stage { stage: &'static str, cause: Box<Error> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            cause: Box::new(self),
        }
    }

    /// True for errors caused by bad user input (files, schemas, configs)
    /// rather than by a failing computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Record { .. }
            | Error::Schema(_)
            | Error::Version { .. }
            | Error::Invariant(_)
            | Error::InvalidInput(_)
            | Error::UnsupportedOrder { .. } => true,
            Error::Stage { cause, .. } => cause.is_validation(),
            _ => false,
        }
    }
}
