use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FvwError>;

#[derive(Debug, Error)]
pub enum FvwError {
    /// An induction factor outside the domain of the rotor coefficient curves.
    #[error("axial induction {0} outside the valid domain a < 1")]
    InductionDomain(f64),

    /// Kernel derivative requested at a coincident or collinear configuration.
    #[error("degenerate vortex kernel input: {0}")]
    DegenerateKernel(&'static str),

    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("state does not match the model layout: {0}")]
    LayoutMismatch(String),

    #[error("non-finite value in the wake state at step {step}")]
    NonFinite { step: usize },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("{0}")]
    Analysis(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FvwError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FvwError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, reason: impl Into<String>) -> Self {
        FvwError::Format {
            what,
            reason: reason.into(),
        }
    }
}
