//! Small convolutional network engine: shape inference, forward and backward
//! passes, plain SGD training and a checkpoint format. All math is `f64`.

pub mod checkpoint;
pub mod config;
pub(crate) mod layers;
pub mod model;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use config::{infer_shapes, parameter_count, Infeasible, LayerSpec, ModelConfig, Shape, NUM_CLASSES};
pub use model::{init_model, Mode, Model, Normalization};
pub use tensor::Tensor;
pub use train::{evaluate, predict_proba, train, Dataset, EpochStats, TrainReport, TrainSettings};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(Infeasible),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} at index {index} is not 0 or 1")]
    InvalidLabel { index: usize, label: usize },
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}
