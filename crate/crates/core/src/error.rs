use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sampling violation: {0}")]
    Sampling(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has zero norm")]
    ZeroNorm,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("inconsistent correlation signs: {0}")]
    SignConvention(String),

    #[error("map is not normalized (sum = {0})")]
    Unnormalized(f64),

    #[error("missing metadata: {0}")]
    MissingMetadata(&'static str),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
