use thiserror::Error;

use crate::field::BasisId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("basis mismatch: field built for {got:?}, operator expects {expected:?}")]
    BasisMismatch { expected: BasisId, got: BasisId },

    #[error("field is not divergence-free: relative divergence {relative:.3e} exceeds {tolerance:.1e}")]
    NotDivergenceFree { relative: f64, tolerance: f64 },

    #[error("non-finite value produced by {context}")]
    NonFinite { context: &'static str },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("container format error: {0}")]
    Format(String),

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("solution blew up at t = {t} (step {step})")]
    BlowUp {
        t: f64,
        step: u64,
        last_state: Box<crate::field::SpectralField>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
