use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed results table {path}: {message}")]
    Table { path: String, message: String },

    #[error("theta grids differ; missing points: {}", missing.join(", "))]
    GridMismatch { missing: Vec<String> },

    #[error("reference method `{0}` not present in the tables")]
    MissingReference(String),

    #[error(transparent)]
    Core(#[from] spdtn_core::Error),

    #[error(transparent)]
    Tn(#[from] spdtn_tn::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
