use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Linear classifier `sign(w . x + b)`; label 1 on the positive side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: f64,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.decision(x) > 0.0)
    }

    pub fn accuracy(&self, features: &DMatrix<f64>, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let correct = features
            .row_iter()
            .zip(labels)
            .filter(|(row, &y)| self.predict(&row.iter().copied().collect::<Vec<_>>()) == y)
            .count();
        correct as f64 / labels.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmSettings {
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Initial step size of the decaying schedule.
    pub initial_step: f64,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self { regularization: 1e-4, epochs: 100, seed: 0, initial_step: 0.1 }
    }
}

/// `lambda/2 |w|^2 + mean hinge loss` over rows with labels `signs` (+-1).
fn objective(w: &[f64], b: f64, lambda: f64, rows: &[Vec<f64>], signs: &[f64]) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = rows
        .iter()
        .zip(signs)
        .map(|(x, s)| (1.0 - s * (b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())).max(0.0))
        .sum();
    reg + hinge / rows.len() as f64
}

/// Hinge loss + L2 by averaged stochastic subgradient descent.
///
/// Features are standardized internally and the returned weights act on
/// the raw features. The step at update `t` is `1 / (lambda (t0 + t))` with
/// `t0 = 1 / (lambda * initial_step)`; the bias is not regularized. Also
/// returns the objective of the averaged iterate, in standardized units,
/// after every epoch.
pub fn train_svm(
    features: &DMatrix<f64>,
    labels: &[usize],
    settings: &SvmSettings,
) -> Result<(SvmModel, Vec<f64>), BaselineError> {
    let (n, k) = features.shape();
    if labels.len() != n {
        return Err(BaselineError::ShapeMismatch { expected: n, got: labels.len() });
    }
    if !(settings.regularization > 0.0) || !(settings.initial_step > 0.0) {
        return Err(BaselineError::InvalidSetting("regularization and step must be positive".into()));
    }
    if labels.iter().any(|&y| y > 1) || !labels.contains(&0) || !labels.contains(&1) {
        return Err(BaselineError::SingleClass);
    }
    let lambda = settings.regularization;
    let mean = DVector::from_iterator(k, features.column_iter().map(|c| c.sum() / n as f64));
    let scale = DVector::from_iterator(
        k,
        features.column_iter().zip(mean.iter()).map(|(c, m)| {
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 { sd } else { 1.0 }
        }),
    );
    let rows: Vec<Vec<f64>> = features
        .row_iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (v - mean[j]) / scale[j]).collect())
        .collect();
    let signs: Vec<f64> = labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect();

    let mut w = vec![0.0; k];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; k];
    let mut avg_b = 0.0;
    let t0 = 1.0 / (lambda * settings.initial_step);
    let mut t = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(settings.epochs);

    let to_raw = |w: &[f64], b: f64| {
        let weights: Vec<f64> = w.iter().zip(scale.iter()).map(|(wi, s)| wi / s).collect();
        let bias = b - weights.iter().zip(mean.iter()).map(|(wi, m)| wi * m).sum::<f64>();
        SvmModel { weights, bias, regularization: lambda }
    };

    for _ in 0..settings.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = 1.0 / (lambda * (t0 + t));
            let x = &rows[i];
            let margin = signs[i] * (b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>());
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                w.iter_mut().zip(x).for_each(|(v, c)| *v += eta * signs[i] * c);
                b += eta * signs[i];
            }
            t += 1.0;
            // running mean of iterates
            let mu = 1.0 / t;
            avg_w.iter_mut().zip(&w).for_each(|(a, v)| *a += mu * (v - *a));
            avg_b += mu * (b - avg_b);
        }
        trace.push(objective(&avg_w, avg_b, lambda, &rows, &signs));
    }
    Ok((to_raw(&avg_w, avg_b), trace))
}
