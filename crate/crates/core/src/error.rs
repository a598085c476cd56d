use thiserror::Error;

/// Errors raised by the channel, estimation and detection primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller violated an operation's precondition (shape, sign, range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A physical parameter produced a non-finite or out-of-domain value.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be inverted is singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// The two hypotheses cannot be told apart.
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    /// An empirical (a, b, c) triple depends on the chosen indices.
    #[error("pilot matrix is not balanced: {0}")]
    Inconsistent(String),

    /// A closed form hit a non-finite intermediate.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested size is beyond what exhaustive evaluation supports.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
