//! Error type shared across the crate.
//!
//! Two failure families matter to callers: bad inputs (rejected up front,
//! recoverable by fixing the call) and numerical breakdowns (singular
//! systems, non-finite results). The CLI maps them to distinct exit codes.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Invalid argument, malformed config, off-grid direction and similar.
    InvalidInput(String),
    /// Singular or ill-conditioned system, non-finite result.
    Numerical(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
