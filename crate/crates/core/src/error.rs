use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the gait pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("polynomial fit is rank deficient; degenerate monomials: {}", .monomials.join(", "))]
    RankDeficient { monomials: Vec<String> },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Training { epoch: usize },

    #[error("model file {path}: {reason}")]
    ModelFormat { path: PathBuf, reason: String },

    #[error("data file {path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("simulation aborted at cycle {cycle}: {source}")]
    Simulation {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
