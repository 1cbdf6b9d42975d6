use thiserror::Error;

use crate::iteration::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("invalid arity {0}: must satisfy 2 <= t <= {max}", max = crate::metric::MAX_ARITY)]
    InvalidArity(usize),

    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("non-finite coordinate in point")]
    NonFinite,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid contraction modulus {0}: must satisfy 0 <= delta < 1")]
    InvalidModulus(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iteration diverged at step {step}")]
    Diverged {
        step: usize,
        trace: Box<IterationTrace>,
    },

    #[error("iterate left the map's domain at step {step}")]
    OutsideDomain {
        step: usize,
        trace: Box<IterationTrace>,
    },

    #[error("no fixed point available: {0}")]
    NoFixedPoint(String),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Partial trace carried by divergence-type errors.
    pub fn partial_trace(&self) -> Option<&IterationTrace> {
        match self {
            Error::Diverged { trace, .. } | Error::OutsideDomain { trace, .. } => Some(trace),
            _ => None,
        }
    }
}
