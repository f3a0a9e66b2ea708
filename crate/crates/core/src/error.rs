use thiserror::Error;

use crate::hpe::SolveTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("operator `{op}` lacks the {capability} capability")]
    Capability {
        op: &'static str,
        capability: &'static str,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("linear system (I + λM) is numerically singular")]
    SingularSolve,

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("certificates have different base points (distance {distance:e})")]
    BasePointMismatch { distance: f64 },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("certificate rejected at step {k}: lhs {lhs:e} > rhs {rhs:e}")]
    CertificateRejected {
        k: usize,
        lhs: f64,
        rhs: f64,
        trace: Box<SolveTrace>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
