use std::path::PathBuf;

use crate::prompt::{AttributeKey, DatasetFamily, PromptType};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate mask: {rows}x{cols}")]
    DegenerateMask { rows: usize, cols: usize },

    #[error("missing required attribute `{0}`")]
    MissingAttribute(AttributeKey),

    #[error("prompt type unavailable: {ptype} is not defined for the {family} family")]
    PromptTypeUnavailable { family: DatasetFamily, ptype: PromptType },

    #[error("unknown attribute key `{key}`; valid keys: {valid}")]
    UnknownAttributeKey { key: String, valid: String },

    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),

    #[error("invalid attribute value for `{key}`: {reason}")]
    InvalidAttributeValue { key: String, reason: String },

    #[error("no samples found under {0}")]
    NoSamples(PathBuf),

    #[error("missing mask for image `{id}` (expected {path})")]
    MissingMask { id: String, path: PathBuf },

    #[error("dataset `{0}` is test-only but has train/val samples on disk")]
    TestOnlyHasTrainData(String),

    #[error("dataset `{0}` is test-only and cannot be used for training")]
    TestOnlyInTraining(String),

    #[error("dataset `{0}` is not an endoscopy dataset and cannot join an endoscopy-only pool")]
    NotEndoscopy(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("unknown label {label} in mask of `{id}`")]
    UnknownLabel { id: String, label: u8 },

    #[error("expected a 3-channel image, got {0} channel(s)")]
    NotRgb(usize),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("dimension mismatch in {layer}: expected {expected:?}, got {got:?}")]
    DimMismatch { layer: String, expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid model configuration: {0}")]
    InvalidModelConfig(String),

    #[error("missing checkpoint for component `{0}`")]
    MissingCheckpoint(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr {lr:e})")]
    NonFiniteLoss { epoch: usize, batch: usize, lr: f64 },

    #[error("cannot evaluate an empty split")]
    EmptySplit,

    #[error("no opposite value registered for `{value}` ({key})")]
    UnmappedOpposite { key: AttributeKey, value: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("missing checkpoint for cross-dataset cell ({train} -> {test})")]
    MissingCell { train: String, test: String },

    #[error(transparent)]
    Candle(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Safetensors(#[from] safetensors::SafeTensorError),

    #[error("plotting failed: {0}")]
    Plot(String),
}
