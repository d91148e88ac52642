//! Error type shared across the crate.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A caller-supplied value violated a precondition.
    InvalidArgument(String),
    /// An object was used in a state it cannot serve from
    /// (e.g. decoding with a state that belongs to another source).
    InvalidState(String),
    /// DEQ is undefined because the two reference-BLEU values coincide.
    UndefinedDeq {
        rfb: f64,
    },
    /// A file could not be parsed.
    Format(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::UndefinedDeq { rfb } => {
                write!(
                    f,
                    "DEQ undefined: baseline and system reference BLEU are both {rfb}"
                )
            }
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
