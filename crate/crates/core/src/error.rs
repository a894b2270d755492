use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of an operation (bad index, bad mode, x <= 0 ...).
    #[error("input out of domain: {0}")]
    Domain(String),

    /// A configuration value is missing, malformed or inconsistent.
    #[error("invalid configuration `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// A caller broke an operation contract (off-grid request, subset outside N(h) ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An oracle was asked for an instance too large to enumerate.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Internal bookkeeping went inconsistent; always a simulator bug.
    #[error("accounting error: {0}")]
    Accounting(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
