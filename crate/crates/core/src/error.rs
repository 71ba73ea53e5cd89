use thiserror::Error;

use crate::sdp::SdpSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a structural check (symmetry, normalization, shape).
    #[error("validation error: {0}")]
    Validation(String),

    /// Input is valid but outside the domain of the requested function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("resource cap exceeded: {what} requires {required}, cap is {cap}; {hint}")]
    ResourceCap {
        what: String,
        required: u128,
        cap: u128,
        hint: String,
    },

    /// The interior-point solver ran out of iterations. The best strictly
    /// feasible iterate is attached.
    #[error("solver did not converge within {iterations} iterations (gap {gap:.3e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        best: Box<SdpSolution>,
    },

    #[error("unsupported problem form: {0}")]
    UnsupportedForm(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
