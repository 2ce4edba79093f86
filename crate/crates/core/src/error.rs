use thiserror::Error;

/// Errors produced by model validation, estimation, and enumeration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("divisibility violated: {0}")]
    Divisibility(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the batch CLI: parse failures exit 2,
    /// budget overruns exit 3, numeric failures exit 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::BudgetExceeded(_) => 3,
            Error::Numeric(_) => 4,
            _ => 1,
        }
    }
}
