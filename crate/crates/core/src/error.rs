use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),

    #[error("norm exceeds the 128-bit range")]
    Overflow,

    #[error("empty spectrum: {0}")]
    EmptySpectrum(String),

    #[error("spectrum is complete only up to norm {bound}, but norm {needed} is required")]
    InsufficientSpectrum { bound: u64, needed: u64 },

    #[error("spectrum format error on line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
