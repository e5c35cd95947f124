use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Hurst parameter {0} not supported (need H in (0,2) and H != 1)")]
    InvalidHurst(f64),

    #[error("covariance factorization failed at row {row}; grid too fine for working precision")]
    Factorization { row: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("solution overflow at step {step} (|X| = {value:e})")]
    Overflow { step: usize, value: f64 },

    #[error("sewing did not converge: {0}")]
    Sewing(String),

    #[error("gradient unavailable for field `{0}`; mollify it first (heat_smooth / mollify_sequence)")]
    GradientUnavailable(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("negative density {value:e} at lattice index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("Picard iteration diverged after {iterations} iterations")]
    Diverged { iterations: usize },
}

impl Error {
    /// Numerical blow-up as opposed to bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Overflow { .. } | Error::Diverged { .. } | Error::Sewing(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
