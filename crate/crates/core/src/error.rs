use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
///
/// Every variant maps onto one of three failure classes (validation, numeric,
/// I/O) that the command-line front-end turns into exit codes 2, 3 and 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("pattern query outside the tabulated range: theta={theta_deg:.4} deg, phi={phi_deg:.4} deg")]
    Interpolation { theta_deg: f64, phi_deg: f64 },

    #[error("point ({kx}, {ky}) lies outside the unit wavenumber disk")]
    Domain { kx: f64, ky: f64 },

    #[error("quadrature did not converge for cell ({mx}, {my}): error estimate {estimate:.3e} > tolerance {tol:.3e}")]
    Quadrature {
        mx: i64,
        my: i64,
        estimate: f64,
        tol: f64,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used for exit codes and machine-readable reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Numeric => 3,
            ErrorKind::Io => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Numeric => "numeric",
            ErrorKind::Io => "io",
        }
    }
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation { .. } | Error::Parse { .. } => ErrorKind::Validation,
            Error::Interpolation { .. }
            | Error::Domain { .. }
            | Error::Quadrature { .. }
            | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
