//! Process exit codes.

use std::fmt;

use reprocs_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Io = 1,
    Config = 2,
    Verify = 3,
    Numerical = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: Code, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self::new(Code::Io, error)
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(Code::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn context(mut self, what: impl fmt::Display + Send + Sync + 'static) -> Self {
        self.error = self.error.context(what);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => Code::Io,
            Error::Config(_) | Error::Parse(_) | Error::InvalidInput(_) | Error::InfeasibleOmega { .. } => {
                Code::Config
            }
            _ => Code::Numerical,
        };
        Self::new(code, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
