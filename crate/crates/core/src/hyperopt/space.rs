use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::nn::{LayerSpec, ModelConfig};

/// Bounds shipped with the crate; wide enough to contain every known top
/// configuration for 64x32x67 inputs.
pub const DEFAULT_SPACE_JSON: &str = include_str!("../../config/default_space.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
    Fc,
    Dropout,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::Fc => "fc",
            LayerKind::Dropout => "dropout",
        })
    }
}

/// Inclusive `[lo, hi]` bounds for every sampled hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub num_layers: [usize; 2],
    pub layer_type_choices: Vec<LayerKind>,
    pub filters: [usize; 2],
    /// Square kernel side.
    pub filter_size: [usize; 2],
    pub pool_size: [usize; 2],
    pub pool_stride: [usize; 2],
    pub fc_units: [usize; 2],
    pub keep_prob: [f64; 2],
    /// Sampled log-uniformly.
    pub learning_rate: [f64; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SPACE_JSON).expect("shipped search space parses")
    }
}

impl SearchSpace {
    pub fn from_json(text: &str) -> Result<Self, SearchError> {
        let space: Self = serde_json::from_str(text).map_err(|e| SearchError::InvalidSpace(e.to_string()))?;
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.layer_type_choices.is_empty() {
            return Err(SearchError::EmptySpace);
        }
        let ints = [
            ("num_layers", self.num_layers),
            ("filters", self.filters),
            ("filter_size", self.filter_size),
            ("pool_size", self.pool_size),
            ("pool_stride", self.pool_stride),
            ("fc_units", self.fc_units),
        ];
        for (name, [lo, hi]) in ints {
            if lo > hi {
                return Err(SearchError::InvalidSpace(format!("{name}: lower bound {lo} above upper bound {hi}")));
            }
            if lo == 0 {
                return Err(SearchError::InvalidSpace(format!("{name}: bounds must be at least 1")));
            }
        }
        let [klo, khi] = self.keep_prob;
        if !(klo > 0.0 && klo <= khi && khi <= 1.0) {
            return Err(SearchError::InvalidSpace(format!("keep_prob [{klo}, {khi}] not inside (0, 1]")));
        }
        let [llo, lhi] = self.learning_rate;
        if !(llo > 0.0 && llo <= lhi && lhi.is_finite()) {
            return Err(SearchError::InvalidSpace(format!("learning_rate [{llo}, {lhi}] must be positive and ordered")));
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [usize; 2]) -> usize {
    rng.random_range(lo..=hi)
}

/// Keep probabilities are drawn on a 0.01 grid so they render like `dropout(0.71)`.
fn keep_prob<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    let v = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    ((v * 100.0).round() / 100.0).clamp(lo, hi)
}

fn log_uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
}

/// Draws a configuration without any feasibility filtering.
pub fn sample_config<R: Rng>(space: &SearchSpace, rng: &mut R) -> Result<ModelConfig, SearchError> {
    space.validate()?;
    let layers = uniform(rng, space.num_layers);
    let mut hidden_layers = Vec::with_capacity(layers);
    for _ in 0..layers {
        let kind = space.layer_type_choices[rng.random_range(0..space.layer_type_choices.len())];
        hidden_layers.push(match kind {
            LayerKind::Conv => {
                let filters = uniform(rng, space.filters);
                let k = uniform(rng, space.filter_size);
                LayerSpec::Conv { filters, kh: k, kw: k }
            }
            LayerKind::Pool => {
                let k = uniform(rng, space.pool_size);
                let stride = uniform(rng, space.pool_stride);
                LayerSpec::Pool { kh: k, kw: k, stride }
            }
            LayerKind::Fc => LayerSpec::Fc { units: uniform(rng, space.fc_units) },
            LayerKind::Dropout => LayerSpec::Dropout { keep_prob: keep_prob(rng, space.keep_prob) },
        });
    }
    Ok(ModelConfig { hidden_layers, learning_rate: log_uniform(rng, space.learning_rate) })
}
