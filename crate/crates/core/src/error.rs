use thiserror::Error;

use crate::state::{OptState, OptimizerKind};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be at least 1")]
    EmptyState,

    #[error("{which} has a negative entry {value} at index {index}")]
    NegativeAuxiliary {
        which: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{which} was supplied but {kind} does not use it")]
    UnexpectedAuxiliary {
        which: &'static str,
        kind: OptimizerKind,
    },

    #[error("state has no {which} component")]
    MissingAuxiliary { which: &'static str },

    #[error("hyperparameter `{name}` is required by {kind}")]
    MissingHyperParam {
        name: &'static str,
        kind: OptimizerKind,
    },

    #[error("hyperparameter `{name}` = {value} is invalid: {reason}")]
    InvalidHyperParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("momentum schedules are only valid with mSGD, not {0}")]
    ScheduleNotAllowed(OptimizerKind),

    #[error("friction {gamma} and step {dt} give gamma*sqrt(dt) > 1; no valid momentum")]
    InvalidPairing { gamma: f64, dt: f64 },

    #[error("non-finite state after step {step}")]
    Diverged {
        step: u64,
        last_finite: Box<OptState>,
    },

    #[error("need at least {needed} strictly positive samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset error: {0}")]
    Dataset(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Dataset(e.to_string())
    }
}
