use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A moment or correlation order the operation does not provide.
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),

    /// A sample statistic could not be formed (zero means, empty series, ...).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A criterion whose left-hand side has a vanishing denominator.
    #[error("criterion not evaluable: {0}")]
    NotEvaluable(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn order(msg: impl Into<String>) -> Self {
        Error::UnsupportedOrder(msg.into())
    }
}
