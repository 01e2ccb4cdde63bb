use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("spectrum atom {index} (weight {weight}, eigenvalue {eigenvalue}): {reason}")]
    InvalidAtom {
        index: usize,
        weight: f64,
        eigenvalue: f64,
        reason: &'static str,
    },

    #[error("integrand is not finite at atom {index} (eigenvalue {eigenvalue})")]
    Pole { index: usize, eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("Gram matrix is numerically singular (smallest eigenvalue {smallest:e}, condition number {condition:e})")]
    SingularGram { smallest: f64, condition: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("solution left the upper half-plane (Im m = {im_m:e})")]
    HalfPlane { im_m: f64 },

    #[error("could not bracket the zero-point equation root")]
    Bracket,

    #[error("ill-conditioned derivative at zero: denominator {denominator:e} (c too close to 1?)")]
    Conditioning { denominator: f64 },

    #[error("pole at z = 0")]
    PoleAtZero,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation(_)
            | Error::InvalidAtom { .. }
            | Error::DimensionMismatch { .. }
            | Error::Pole { .. } => ErrorKind::Validation,
            Error::SingularGram { .. }
            | Error::Divergence { .. }
            | Error::HalfPlane { .. }
            | Error::Bracket
            | Error::Conditioning { .. }
            | Error::PoleAtZero => ErrorKind::Numerical,
            Error::Parse { .. } | Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
