use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("type `{label}` is not part of scheme `{scheme}`")]
    Scheme { label: String, scheme: String },

    #[error("unknown type scheme `{0}`")]
    UnknownScheme(String),

    #[error("embedding store format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("document `{0}` is not in the embedding store")]
    UnknownDocument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in tensor `{0}`")]
    NonFinite(String),

    #[error("missing pooled vectors for {} mention(s): {}", .0.len(), .0.join(", "))]
    MissingVectors(Vec<String>),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub(crate) fn shape(message: impl Into<String>) -> Self {
        Error::Shape(message.into())
    }
}
