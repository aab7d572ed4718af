use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("out of domain: {0}")]
    Domain(String),

    /// The bracket around a float-mode remainder straddles a digit boundary.
    #[error("precision exhausted at digit position {position} ({bits} bits)")]
    PrecisionExhausted { position: usize, bits: usize },

    #[error("index {index} lies beyond the explicit prefix of {len} weights and no tail rule is declared")]
    BeyondPrefix { index: String, len: usize },

    #[error("digit word has an unspecified tail; it does not name a single point")]
    AmbiguousPoint,

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
