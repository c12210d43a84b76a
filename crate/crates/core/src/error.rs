use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory needs at least 2 states, got {0}")]
    TrajectoryTooShort(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate in state {index}")]
    NonFinite { index: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("tangent undefined: all trajectory states coincide")]
    DegenerateTrajectory,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty sample set")]
    EmptySamples,

    #[error("objective is not finite ({0})")]
    NonFiniteObjective(f64),

    #[error("no feasible gate sequence: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by bad configuration or input files.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::InvalidParameter { .. }
                | Error::DimensionMismatch { .. }
                | Error::TrajectoryTooShort(_)
                | Error::NonFinite { .. }
                | Error::EmptyDataset
                | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
