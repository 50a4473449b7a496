use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("point not observed in frame {frame}")]
    NotObserved { frame: u8 },
    #[error("scene generation failed: {0}")]
    Scene(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("sweep spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] rsstitch_core::Error),
    #[error(transparent)]
    Render(#[from] rsstitch_render::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
