use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("index out of range: {what} {index} (limit {limit})")]
    OutOfRange { what: &'static str, index: usize, limit: usize },

    /// The policy-evaluation system had no usable pivot for this state.
    #[error("singular evaluation system at state {state}")]
    Singular { state: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
