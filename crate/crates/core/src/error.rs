use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent model or scenario configuration (dimensions, ranges).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller-supplied argument is out of range or has the wrong shape.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A testing group selected no sensors; the caller must skip the test.
    #[error("empty testing group")]
    EmptyGroup,

    /// Numerical breakdown: non-PD innovation covariance, simplex failure.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An exhaustive search would exceed its configured work budget.
    #[error("search budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
