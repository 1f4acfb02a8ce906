use std::path::PathBuf;

use crate::config::ConfigErrors;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),

    #[error("not comparable: {0}")]
    NotComparable(String),

    #[error("{diverged} of {runs} runs diverged (limit is 10%)")]
    TooManyDiverged { diverged: usize, runs: usize },

    #[error("theory recursion failed at t={t}: {source}")]
    Theory {
        t: usize,
        source: bregmix_core::Error,
    },

    #[error(transparent)]
    Core(#[from] bregmix_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl AppError {
    /// Process exit status: 2 for config problems, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::NotComparable(_) => 2,
            AppError::TooManyDiverged { .. } => 3,
            AppError::Core(bregmix_core::Error::Divergence) => 3,
            AppError::Core(bregmix_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AppError {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }
}
