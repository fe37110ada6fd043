use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("collective spin has zero mean length; squeezing is undefined")]
    ZeroSpinLength,

    #[error("Holstein-Primakoff approximation violated: {0}")]
    HolsteinPrimakoff(String),

    #[error("drift matrix is not stable (max real eigenvalue {max_real_eigenvalue:.3e}); no steady state exists")]
    UnstableDrift { max_real_eigenvalue: f64 },

    #[error("linear system is singular: {0}")]
    Singular(&'static str),

    #[error("covariance matrix is not physical: {0}")]
    Unphysical(String),

    #[error("optimizer did not converge after {iterations} sweeps (best S/N {best_snr})")]
    NotConverged { iterations: usize, best_snr: f64 },

    #[error("too few rounds for the variance test: {got} sifted rounds, need at least {min}")]
    TooFewRounds { got: usize, min: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Fails unless `value` is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
