use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("generation overflow: {0}")]
    GenerationOverflow(String),

    #[error("not found within cap {cap}: deepest index {deepest}, blocking bound {blocking}")]
    NotFoundWithinCap {
        cap: String,
        deepest: usize,
        blocking: String,
    },

    #[error("no truncation point: {0}")]
    NoSuchN(String),

    #[error("divergent tail: {0}")]
    DivergentTail(String),

    #[error("undecided membership at indices {0:?}")]
    UndecidedMembership(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            col,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
