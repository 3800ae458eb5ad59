use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{what} is empty")]
    EmptySet { what: String },

    #[error("closed loop is not Schur stable (spectral radius {radius:.6})")]
    UnstableClosedLoop { radius: f64 },

    #[error("invariance verification failed at {point:?}: {detail}")]
    VerificationFailed { point: Vec<f64>, detail: String },

    #[error("controller infeasible at state {state:?}")]
    Infeasible { state: Vec<f64> },

    #[error("safety violation at step {step}: state {state:?} left {set}")]
    SafetyViolation { step: usize, state: Vec<f64>, set: String },

    #[error("bundle was computed for a different system (expected hash {expected}, found {found})")]
    ProvenanceMismatch { expected: String, found: String },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
