use thiserror::Error;

use crate::nn::GradOrigin;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite value in {origin} gradient")]
    NonFinite { origin: GradOrigin },

    #[error("sensitive group {group} has no samples")]
    DegenerateGroup { group: u8 },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data has zero variance along every direction")]
    DegenerateVariance,

    #[error("requested {requested} samples but only {available} are available")]
    Size { requested: usize, available: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no usable rows: {0}")]
    EmptyData(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(String),
}

pub type Result<T> = std::result::Result<T, Error>;
