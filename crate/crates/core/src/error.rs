use std::io;

use thiserror::Error;

/// Errors raised anywhere in the diagnosis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data is malformed or non-finite.
    #[error("data error: {0}")]
    Data(String),
    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    Training(String),
    /// A configuration file or flag could not be interpreted.
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Training(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
