use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the vinecut pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown category name `{0}`")]
    ClassMap(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("{0}")]
    Usage(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    Dimension { expected_w: u32, expected_h: u32, found_w: u32, found_h: u32 },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("depth unavailable: {0}")]
    Depth(String),

    #[error("scene contains no main cordon instance")]
    EmptyModel,

    #[error("assessment failed: {0}")]
    Assessment(String),

    #[error("degenerate segment: both endpoints coincide")]
    DegenerateSegment,

    #[error("no mask or valid depth within {radius} px of ({x}, {y})")]
    Correction { x: u32, y: u32, radius: u32 },

    #[error("invalid scene spec: {0}")]
    Spec(String),

    #[error("cannot score models: {0}")]
    Scoring(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
