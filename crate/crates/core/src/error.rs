use thiserror::Error;

/// Errors raised by the variance-homogeneity tests and their supporting numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty sample: at least one observation is required")]
    EmptySample,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    /// Process exit code used by the command-line tool: 2 for input problems,
    /// 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
