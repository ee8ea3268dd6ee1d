//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value in {context}{}", time_suffix(*.time))]
    NonFinite {
        context: &'static str,
        time: Option<usize>,
    },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("moment matching diverged at step {step} (loss = {loss})")]
    MatchingDiverged { step: usize, loss: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn time_suffix(t: Option<usize>) -> String {
    match t {
        Some(t) => format!(" at t={t}"),
        None => String::new(),
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn non_finite(context: &'static str) -> Self {
        Error::NonFinite {
            context,
            time: None,
        }
    }

    pub fn non_finite_at(context: &'static str, t: usize) -> Self {
        Error::NonFinite {
            context,
            time: Some(t),
        }
    }
}
