use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Each variant maps to a stable category string (see [`Error::category`]) which
/// the command line front end prints as the prefix of its error line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch on {axis}: expected {expected}, got {actual}")]
    Shape {
        axis: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::Argument(_) => "argument",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(axis: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape { axis, expected, actual }
    }
}

/// Attach a file name to an error so batch commands can say which input failed.
pub(crate) fn with_path(err: Error, path: &std::path::Path) -> Error {
    let p = path.display();
    match err {
        Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{p}: {e}"))),
        Error::Format { what, reason } => Error::Format {
            what,
            reason: format!("{p}: {reason}"),
        },
        Error::Validation(m) => Error::Validation(format!("{p}: {m}")),
        Error::Argument(m) => Error::Argument(format!("{p}: {m}")),
        Error::Config(m) => Error::Config(format!("{p}: {m}")),
        e @ Error::Shape { .. } => Error::Validation(format!("{p}: {e}")),
    }
}
