use std::path::PathBuf;

use crate::timeseries::Timestamp;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("every reading in the input is missing or invalid")]
    AllMissing,

    #[error("step of {to} s is not an integer multiple of {from} s")]
    StepRatio { from: i64, to: i64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("correlation undefined: {0} sequence is constant")]
    UndefinedCorrelation(&'static str),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("not enough history: first feasible timestamp is {first_feasible}")]
    ColdStart { first_feasible: Timestamp },

    #[error("model has no data: {0}")]
    NotFitted(&'static str),

    #[error("{what} does not cover {at}")]
    Coverage { what: &'static str, at: Timestamp },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid profile data: {0}")]
    Profile(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
