use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid geometry: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(&'static str),

    #[error("beam leaves the usable grid at frame {frame}: center ({x_um:.2}, {y_um:.2}) µm")]
    BeamOffGrid { frame: usize, x_um: f64, y_um: f64 },

    #[error("query (E = {energy_uj} µJ, N = {pulses}) lies outside the label grid")]
    OutOfRange { energy_uj: f64, pulses: f64 },

    #[error("input value {value} at index {index} is outside [0, 1]")]
    InputRange { index: usize, value: f32 },

    #[error("backward called on `{0}` without a recorded forward pass")]
    NoForwardContext(&'static str),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("not a recognized file: {0}")]
    Format(String),

    #[error("unsupported format version: {0}")]
    Version(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },

    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
