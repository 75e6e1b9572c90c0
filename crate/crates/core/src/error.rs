use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("cannot parse function spec `{spec}`: {reason}")]
    Spec { spec: String, reason: String },

    #[error("prox-boundedness violated: {0}")]
    ProxBound(String),

    #[error("empty domain: {0}")]
    DomainEmpty(String),

    #[error("anchor {0} is outside the sampled domain of the subdifferential")]
    Anchor(f64),

    #[error("point {0} is not critical for any tested lambda")]
    NotCritical(f64),

    #[error("step size {lambda} outside (0, {bound})")]
    StepSize { lambda: f64, bound: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("prox mapping has a flat stretch next to isolated minimizers at x = {0}")]
    NonConvexPlateau(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
