//! Comparison models: PCA followed by a linear SVM, and a fixed hand-built
//! CNN architecture.

pub mod pca;
pub mod svm;

pub use pca::{fit_pca, PcaModel, PcaSolver, DENSE_LIMIT};
pub use svm::{train_svm, SvmModel, SvmSettings};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{train, Dataset, LayerSpec, ModelConfig, NnError, TrainSettings};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Three conv(3x3)/pool(2x2, stride 2) pairs with 32, 64 and 128 filters,
/// then fc(512).
pub fn handcrafted_config() -> ModelConfig {
    let mut hidden_layers = Vec::new();
    for filters in [32, 64, 128] {
        hidden_layers.push(LayerSpec::Conv { filters, kh: 3, kw: 3 });
        hidden_layers.push(LayerSpec::Pool { kh: 2, kw: 2, stride: 2 });
    }
    hidden_layers.push(LayerSpec::Fc { units: 512 });
    ModelConfig { hidden_layers, learning_rate: 0.001 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub k: usize,
    pub svm: SvmSettings,
    pub solver: PcaSolver,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self { k: 500, svm: SvmSettings::default(), solver: PcaSolver::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnResult {
    pub config: String,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub manifest_id: String,
    pub k: usize,
    pub components: usize,
    pub rank_deficient: bool,
    pub regularization: f64,
    pub epochs: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handcrafted: Option<CnnResult>,
}

/// Rows of a dataset as an `N x D` matrix.
pub fn dataset_matrix(data: &Dataset) -> DMatrix<f64> {
    let d = data.sample_shape().size();
    DMatrix::from_fn(data.len(), d, |i, j| data.inputs()[i * d + j] as f64)
}

/// PCA fitted on the training rows only, then a linear SVM on the
/// projections; both splits are scored.
pub fn run_pca_svm(
    train_set: &Dataset,
    test_set: &Dataset,
    manifest_id: &str,
    options: &BaselineOptions,
) -> Result<BaselineReport, BaselineError> {
    if test_set.is_empty() {
        return Err(BaselineError::Nn(NnError::EmptyDataset));
    }
    let pca = fit_pca(&dataset_matrix(train_set), options.k, options.solver)?;
    let train_x = pca.project_rows(&dataset_matrix(train_set))?;
    let test_x = pca.project_rows(&dataset_matrix(test_set))?;
    let (svm, _) = train_svm(&train_x, train_set.labels(), &options.svm)?;
    Ok(BaselineReport {
        manifest_id: manifest_id.to_string(),
        k: options.k,
        components: pca.k(),
        rank_deficient: pca.rank_deficient(),
        regularization: options.svm.regularization,
        epochs: options.svm.epochs,
        train_size: train_set.len(),
        test_size: test_set.len(),
        train_accuracy: svm.accuracy(&train_x, train_set.labels()),
        test_accuracy: svm.accuracy(&test_x, test_set.labels()),
        handcrafted: None,
    })
}

/// Trains [`handcrafted_config`] and reports accuracy on both splits.
pub fn run_handcrafted(
    train_set: &Dataset,
    test_set: &Dataset,
    settings: &TrainSettings,
) -> Result<CnnResult, BaselineError> {
    let config = handcrafted_config();
    let (model, report) = train(&config, train_set, test_set, settings)?;
    Ok(CnnResult {
        config: config.render(),
        epochs: settings.epochs,
        best_epoch: report.best_epoch,
        train_accuracy: crate::nn::evaluate(&model, train_set)?,
        test_accuracy: report.best_val_acc,
    })
}
