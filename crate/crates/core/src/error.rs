use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("image table is not a bijection of 0..{degree}")]
    NotABijection { degree: usize },

    #[error("index {index} out of range for size {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("{what} would exceed the cap of {limit} (requested {requested})")]
    CapExceeded {
        what: &'static str,
        limit: usize,
        requested: usize,
    },

    #[error("permutation {0} is not an element of the group")]
    NotInGroup(String),

    #[error("actions are defined over different groups")]
    GroupMismatch,

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
