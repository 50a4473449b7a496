use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster dimensions: {0}")]
    Dimension(String),
    #[error("image I/O: {0}")]
    Image(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] rsstitch_core::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
