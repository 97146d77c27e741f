use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration budget exceeded: {paths} noise paths (limit {limit})")]
    BudgetExceeded { paths: f64, limit: u64 },

    #[error("noise distribution of this problem is not enumerable")]
    NotEnumerable,

    #[error("rate `{name}` is not valid here: {reason}")]
    RateRange { name: String, reason: String },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("malformed dataset file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
