use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Shape, NUM_CLASSES};
use super::model::{argmax, init_model, softmax, Mode, Model, Normalization};
use super::{NnError, Tensor};

/// Samples stored as `f32`, widened to `f64` per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sample_shape: Shape,
    inputs: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(sample_shape: Shape, inputs: Vec<f32>, labels: Vec<usize>) -> Result<Self, NnError> {
        let per = sample_shape.size();
        if per == 0 || inputs.len() != per * labels.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} values for {} samples of {sample_shape}", per * labels.len(), labels.len()),
                got: format!("{} values", inputs.len()),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= NUM_CLASSES) {
            return Err(NnError::InvalidLabel { index, label });
        }
        Ok(Self { sample_shape, inputs, labels })
    }

    pub fn sample_shape(&self) -> Shape {
        self.sample_shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &[f32] {
        &self.inputs
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let per = self.sample_shape.size();
        &self.inputs[i * per..(i + 1) * per]
    }

    /// New dataset with the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.sample_shape.size());
        for &i in indices {
            inputs.extend_from_slice(self.sample(i));
        }
        Self { sample_shape: self.sample_shape, inputs, labels: indices.iter().map(|&i| self.labels[i]).collect() }
    }

    /// Batch tensor and labels for the given rows.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let mut data = Vec::with_capacity(indices.len() * self.sample_shape.size());
        for &i in indices {
            data.extend(self.sample(i).iter().map(|&v| v as f64));
        }
        let mut shape = vec![indices.len()];
        match self.sample_shape {
            Shape::Map { channels, height, width } => shape.extend([channels, height, width]),
            Shape::Flat(k) => shape.push(k),
        }
        let tensor = Tensor::new(shape, data).expect("batch shape follows sample shape");
        (tensor, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Fit a global input standardization on the training set.
    pub normalize: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 64, seed: 0, normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_val_acc: f64,
    /// 1-based epoch whose parameters were kept; `None` before any epoch ran.
    pub best_epoch: Option<usize>,
    /// Training stopped on a non-finite loss.
    pub diverged: bool,
}

/// Plain minibatch SGD at the config's learning rate. Rows are reshuffled
/// every epoch; the returned model is the one with the best validation
/// accuracy (earliest on ties).
pub fn train(
    config: &ModelConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    settings: &TrainSettings,
) -> Result<(Model, TrainReport), NnError> {
    if settings.batch_size == 0 {
        return Err(NnError::InvalidSetting("batch size 0".into()));
    }
    let mut model = init_model(config, train_set.sample_shape(), settings.seed)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if val_set.sample_shape() != train_set.sample_shape() {
        return Err(NnError::ShapeMismatch {
            expected: train_set.sample_shape().to_string(),
            got: val_set.sample_shape().to_string(),
        });
    }
    if settings.normalize {
        model.normalization = Normalization::fit(train_set.inputs());
    }

    let mut report = TrainReport { epochs: Vec::new(), best_val_acc: 0.0, best_epoch: None, diverged: false };
    let mut best = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed_0f_7a1e);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    'epochs: for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0);
        for chunk in order.chunks(settings.batch_size) {
            let (batch, labels) = train_set.batch(chunk);
            let mode = Mode::Train { dropout_seed: rng.random() };
            let (loss, grads, ok) = model.step_parts(&batch, &labels, mode)?;
            if !loss.is_finite() {
                report.diverged = true;
                break 'epochs;
            }
            loss_sum += loss * chunk.len() as f64;
            correct += ok;
            model.sgd_step(&grads, config.learning_rate)?;
        }
        let val_acc = evaluate(&model, val_set)?;
        if !model.params().iter().all(|p| p.data().iter().all(|v| v.is_finite())) {
            report.diverged = true;
            break;
        }
        report.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_acc,
        });
        if report.best_epoch.is_none() || val_acc > report.best_val_acc {
            report.best_val_acc = val_acc;
            report.best_epoch = Some(epoch);
            best = model.clone();
        }
    }
    Ok((best, report))
}

const EVAL_BATCH: usize = 64;

fn logits_for(model: &Model, data: &Dataset) -> Result<Vec<f64>, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut out = Vec::with_capacity(data.len() * NUM_CLASSES);
    let rows: Vec<usize> = (0..data.len()).collect();
    for chunk in rows.chunks(EVAL_BATCH) {
        let (batch, _) = data.batch(chunk);
        out.extend_from_slice(model.forward(&batch, Mode::Eval)?.data());
    }
    Ok(out)
}

/// Fraction of rows whose argmax logit equals the label.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<f64, NnError> {
    let logits = logits_for(model, data)?;
    let correct = logits
        .chunks(NUM_CLASSES)
        .zip(data.labels())
        .filter(|(z, &label)| argmax(z) == label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Softmax class probabilities per row.
pub fn predict_proba(model: &Model, data: &Dataset) -> Result<Vec<[f64; NUM_CLASSES]>, NnError> {
    let logits = logits_for(model, data)?;
    Ok(logits
        .chunks(NUM_CLASSES)
        .map(|z| {
            let p = softmax(z);
            [p[0], p[1]]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    /// Two Gaussian blobs separated along the diagonal.
    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let c = if label == 0 { -1.5 } else { 1.5 };
            inputs.push(c + rng.random_range(-1.0..1.0f32));
            inputs.push(c + rng.random_range(-1.0..1.0f32));
            labels.push(label);
        }
        Dataset::new(Shape::Flat(2), inputs, labels).unwrap()
    }

    fn fc_config(lr: f64) -> ModelConfig {
        ModelConfig { hidden_layers: vec![LayerSpec::Fc { units: 4 }], learning_rate: lr }
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data = blobs(100, 1);
        let settings = TrainSettings { epochs: 200, batch_size: 10, seed: 3, normalize: false };
        let (model, report) = train(&fc_config(0.05), &data, &data, &settings).unwrap();
        assert_eq!(report.best_val_acc, 1.0);
        assert_eq!(evaluate(&model, &data).unwrap(), 1.0);
        let best = report.epochs.iter().map(|e| e.val_acc).fold(0.0, f64::max);
        assert_eq!(best, report.best_val_acc);
    }

    #[test]
    fn zero_epochs_leave_model_untrained() {
        let data = blobs(10, 1);
        let settings = TrainSettings { epochs: 0, batch_size: 4, seed: 3, normalize: false };
        let (model, report) = train(&fc_config(0.05), &data, &data, &settings).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(report.best_epoch, None);
        assert_eq!(model, init_model(&fc_config(0.05), Shape::Flat(2), 3).unwrap());
    }

    #[test]
    fn same_seed_same_report() {
        let data = blobs(40, 2);
        let config = ModelConfig {
            hidden_layers: vec![LayerSpec::Fc { units: 5 }, LayerSpec::Dropout { keep_prob: 0.8 }],
            learning_rate: 0.05,
        };
        let settings = TrainSettings { epochs: 5, batch_size: 8, seed: 9, normalize: true };
        let a = train(&config, &data, &data, &settings).unwrap();
        let b = train(&config, &data, &data, &settings).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn loss_decreases_under_sgd() {
        let data = blobs(8, 4);
        let config = ModelConfig { hidden_layers: vec![LayerSpec::Dropout { keep_prob: 1.0 }], learning_rate: 0.01 };
        let mut model = init_model(&config, Shape::Flat(2), 5).unwrap();
        let rows: Vec<usize> = (0..8).collect();
        let (batch, labels) = data.batch(&rows);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let (loss, grads) = model.loss_and_grad(&batch, &labels, Mode::Eval).unwrap();
            assert!(loss < last);
            last = loss;
            model.sgd_step(&grads, 0.01).unwrap();
        }
    }

    #[test]
    fn evaluation_edge_cases() {
        let data = blobs(10, 5);
        let config = fc_config(0.1);
        let mut model = init_model(&config, Shape::Flat(2), 0).unwrap();
        // constant class 1 through the output bias
        for p in model.params_mut() {
            p.data_mut().fill(0.0);
        }
        let last = model.params().len() - 1;
        model.params_mut()[last].data_mut()[1] = 1.0;
        assert_eq!(evaluate(&model, &data).unwrap(), 0.5);
        // shifting both logits changes nothing
        model.params_mut()[last].data_mut()[0] = 5.0;
        model.params_mut()[last].data_mut()[1] = 6.0;
        assert_eq!(evaluate(&model, &data).unwrap(), 0.5);
        let probs = predict_proba(&model, &data).unwrap();
        assert!(probs.iter().all(|p| (p[0] + p[1] - 1.0).abs() < 1e-12));
        let empty = Dataset::new(Shape::Flat(2), vec![], vec![]).unwrap();
        assert_eq!(evaluate(&model, &empty), Err(NnError::EmptyDataset));
        assert!(matches!(
            train(&config, &empty, &data, &TrainSettings::default()),
            Err(NnError::EmptyDataset)
        ));
    }
}
