use thiserror::Error;

/// Errors raised by the numerical and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge within {n_max} terms (last term magnitude {last_term:e})")]
    NonConvergence { n_max: usize, last_term: f64 },

    #[error("quadrature did not reach tolerance (estimated error {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid correlation matrix: {0}")]
    InvalidMatrix(String),

    #[error("clipped negative mass {clipped:e} exceeds the allowed {limit:e}")]
    ExcessiveClipping { clipped: f64, limit: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
