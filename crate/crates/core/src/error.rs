use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("malformed mask: {0}")]
    MalformedMask(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("matched query {query} has no mask but ground-truth object {object} does")]
    MissingPredictionMask { object: usize, query: usize },

    #[error("frames misaligned: {0}")]
    Misaligned(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("unknown class label {0:?}")]
    UnknownClass(String),

    #[error("unknown format {0:?}")]
    UnknownFormat(String),

    #[error("stream error at line {line}: {message}")]
    Stream { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
