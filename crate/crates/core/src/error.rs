use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (wrong dimensions, label
    /// out of range, foreign pool slot, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Binary fusion by graph cut was requested on a non-submodular instance.
    #[error("fusion is not submodular on edge {edge}; route it through QPBO")]
    NotSubmodular { edge: usize },

    /// An exhaustive search would exceed the enumeration cap.
    #[error("instance has {states} states, exhaustive search is capped at {cap}")]
    TooLarge { states: f64, cap: u64 },

    /// Invalid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed trace file.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
