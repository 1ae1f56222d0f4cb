use thiserror::Error;

/// Errors raised by the detector and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChasmError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("warm-start batch too short: need at least {needed} observations, got {got}")]
    BatchTooShort { needed: usize, got: usize },

    #[error("eigenvalue solver did not converge")]
    EigenFailure,

    #[error("statistic requires at least one velocity since the last reset")]
    NotReady,

    #[error(
        "velocity covariance is ill-conditioned (condition number {condition:.3e}); \
         extend the burn-in or increase the ridge"
    )]
    IllConditioned { condition: f64 },

    #[error("statistic evaluated to {0:e}, below the round-off tolerance")]
    NegativeStatistic(f64),
}

impl ChasmError {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ChasmError::EigenFailure
                | ChasmError::IllConditioned { .. }
                | ChasmError::NegativeStatistic(_)
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ChasmError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = ChasmError> = std::result::Result<T, E>;
