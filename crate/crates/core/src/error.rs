use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("data error at index {index}: {reason}")]
    Data { index: usize, reason: String },
    #[error("non-stationary parameters: {0}")]
    NonStationary(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
