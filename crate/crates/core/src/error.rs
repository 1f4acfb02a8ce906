use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("divergence detected")]
    Divergence,

    #[error("infinite SNR: noise variance is zero")]
    InfiniteSnr,

    #[error("quotient approximation degenerate (denominator {0:e})")]
    DegenerateQuotient(f64),

    #[error("ill-conditioned system (condition number {0:e})")]
    IllConditioned(f64),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("ensemble runs have different horizons")]
    RaggedEnsemble,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
