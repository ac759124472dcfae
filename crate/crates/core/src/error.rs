use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("transmission rate is zero, the link cannot deliver any bits")]
    ZeroRate,

    #[error("latency evaluation needs at least one device")]
    EmptyMvdSet,

    #[error("promptness requirement needs at least one user")]
    EmptyUserSet,

    #[error("transition row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("action {action} is outside [0, {max}]")]
    InvalidAction { action: usize, max: usize },

    #[error("network input contains a non-finite value")]
    NonFiniteInput,

    #[error("minibatch is empty")]
    EmptyBatch,

    #[error("environment has not been reset")]
    NotReset,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("no episode records to summarize or write")]
    NoRecords,

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("{context} ({path}): {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(context: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context,
            path: path.into(),
            source,
        }
    }
}
