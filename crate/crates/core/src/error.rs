use std::io;

use thiserror::Error;

use crate::runner::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed data whose shape does not match the receiver.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// NaN/Inf showed up in a loss or gradient; the offending update was not applied.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("not enough data: need {needed} transitions, buffer holds {available}")]
    NotEnoughData { needed: usize, available: usize },

    #[error("episode has ended; call reset before stepping")]
    EpisodeFinished,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
