use thiserror::Error;

/// Errors produced by the modem, channel and learning primitives.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bit word length mismatch: {left} vs {right}")]
    WordLengthMismatch { left: usize, right: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("LMS equalizer diverged at step {step} (|e| = {magnitude})")]
    Divergence { step: usize, magnitude: f64 },

    #[error("non-finite gradient in parameter block '{block}'")]
    NonFiniteGradient { block: &'static str },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
