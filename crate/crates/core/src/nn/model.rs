use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{infer_shapes, LayerSpec, ModelConfig, Shape, NUM_CLASSES};
use super::layers::{self, ConvDims, PoolDims};
use super::{NnError, Tensor};

/// Affine map applied to every input value before the first layer:
/// `(x - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

impl Normalization {
    /// Global mean and standard deviation of `values`; identity when the
    /// spread is zero or there is nothing to measure.
    pub fn fit(values: &[f32]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 0.0 && std.is_finite() {
            Self { mean, std }
        } else {
            Self { mean, std: 1.0 }
        }
    }

    pub fn is_identity(&self) -> bool {
        self.mean == 0.0 && self.std == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Conv { dims: ConvDims, param: usize },
    Pool { dims: PoolDims },
    Dense { inputs: usize, units: usize, param: usize, relu: bool },
    Dropout { keep_prob: f64, stream: u64 },
}

fn plan(config: &ModelConfig, input: Shape, shapes: &[Shape]) -> Vec<Op> {
    let mut ops = Vec::with_capacity(shapes.len());
    let mut cur = input;
    let mut param = 0;
    let layers = config.hidden_layers.iter().map(Some).chain(std::iter::once(None));
    for (i, (layer, &out)) in layers.zip(shapes).enumerate() {
        let op = match (layer, cur) {
            (Some(&LayerSpec::Conv { filters, kh, kw }), Shape::Map { channels, height, width }) => {
                param += 2;
                Op::Conv { dims: ConvDims { c: channels, h: height, w: width, f: filters, kh, kw }, param: param - 2 }
            }
            (Some(&LayerSpec::Pool { kh, kw, stride }), Shape::Map { channels, height, width }) => {
                Op::Pool { dims: PoolDims { c: channels, h: height, w: width, kh, kw, stride } }
            }
            (Some(&LayerSpec::Dropout { keep_prob }), _) => Op::Dropout { keep_prob, stream: i as u64 },
            (Some(&LayerSpec::Fc { units }), s) => {
                param += 2;
                Op::Dense { inputs: s.size(), units, param: param - 2, relu: true }
            }
            (None, s) => {
                param += 2;
                Op::Dense { inputs: s.size(), units: NUM_CLASSES, param: param - 2, relu: false }
            }
            _ => unreachable!("shapes were inferred"),
        };
        ops.push(op);
        cur = out;
    }
    ops
}

/// A network built from a [`ModelConfig`] for a fixed per-sample input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    input_shape: Shape,
    shapes: Vec<Shape>,
    params: Vec<Tensor>,
    seed: u64,
    pub normalization: Normalization,
}

/// Glorot-uniform weights and zero biases, drawn in layer order from `seed`.
pub fn init_model(config: &ModelConfig, input_shape: Shape, seed: u64) -> Result<Model, NnError> {
    let shapes = infer_shapes(config, input_shape).map_err(NnError::InfeasibleConfig)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for op in plan(config, input_shape, &shapes) {
        let (wshape, fan_in, fan_out, bias) = match op {
            Op::Conv { dims: d, .. } => {
                (vec![d.f, d.c, d.kh, d.kw], d.c * d.kh * d.kw, d.f * d.kh * d.kw, d.f)
            }
            Op::Dense { inputs, units, .. } => (vec![units, inputs], inputs, units, units),
            _ => continue,
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = wshape.iter().product();
        let w = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
        params.push(Tensor::new(wshape, w)?);
        params.push(Tensor::zeros(vec![bias]));
    }
    Ok(Model { config: config.clone(), input_shape, shapes, params, seed, normalization: Normalization::default() })
}

/// Activations kept for the backward pass.
struct Trace {
    /// `acts[i]` is the input of op `i`; the last entry holds the logits.
    acts: Vec<Vec<f64>>,
    argmax: Vec<Option<Vec<u32>>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl Model {
    /// Rebuilds a model from stored parts, checking parameter shapes.
    pub fn from_parts(
        config: ModelConfig,
        input_shape: Shape,
        seed: u64,
        normalization: Normalization,
        params: Vec<Tensor>,
    ) -> Result<Self, NnError> {
        let mut model = init_model(&config, input_shape, seed)?;
        if params.len() != model.params.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} parameter tensors", model.params.len()),
                got: format!("{}", params.len()),
            });
        }
        for (want, got) in model.params.iter().zip(&params) {
            if want.shape() != got.shape() {
                return Err(NnError::ShapeMismatch {
                    expected: format!("{:?}", want.shape()),
                    got: format!("{:?}", got.shape()),
                });
            }
        }
        model.params = params;
        model.normalization = normalization;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    /// Output shapes of every layer, ending with the 2-class output.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Weight and bias tensors in layer order.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn batch_rows(&self, batch: &Tensor) -> Result<usize, NnError> {
        let n = batch.rows();
        let per: usize = batch.shape().iter().skip(1).product();
        let ok = match (self.input_shape, batch.shape()) {
            (Shape::Map { channels, height, width }, [_, c, h, w]) => (*c, *h, *w) == (channels, height, width),
            (_, [_, _]) | (Shape::Flat(_), _) => per == self.input_shape.size(),
            _ => false,
        };
        if !ok || n == 0 {
            return Err(NnError::ShapeMismatch {
                expected: format!("[batch, {}]", self.input_shape),
                got: format!("{:?}", batch.shape()),
            });
        }
        Ok(n)
    }

    fn run(&self, batch: &Tensor, mode: Mode) -> Result<Trace, NnError> {
        let n = self.batch_rows(batch)?;
        let ops = plan(&self.config, self.input_shape, &self.shapes);
        let mut x = batch.data().to_vec();
        if !self.normalization.is_identity() {
            let Normalization { mean, std } = self.normalization;
            x.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
        let mut trace = Trace { acts: Vec::with_capacity(ops.len() + 1), argmax: vec![], masks: vec![] };
        for op in ops {
            let (mut y, arg, mask) = match op {
                Op::Conv { dims, param } => {
                    let mut y = layers::conv_forward(&x, n, dims, self.params[param].data(), self.params[param + 1].data());
                    layers::relu_in_place(&mut y);
                    (y, None, None)
                }
                Op::Pool { dims } => {
                    let (y, arg) = layers::pool_forward(&x, n, dims);
                    (y, Some(arg), None)
                }
                Op::Dense { inputs, param, relu, .. } => {
                    let mut y =
                        layers::dense_forward(&x, n, inputs, self.params[param].data(), self.params[param + 1].data());
                    if relu {
                        layers::relu_in_place(&mut y);
                    }
                    (y, None, None)
                }
                Op::Dropout { keep_prob, stream } => match mode {
                    Mode::Train { dropout_seed } if keep_prob < 1.0 => {
                        let mask = layers::dropout_mask(x.len(), keep_prob, dropout_seed, stream);
                        let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
                        (y, None, Some(mask))
                    }
                    _ => (x.clone(), None, None),
                },
            };
            std::mem::swap(&mut x, &mut y);
            trace.acts.push(y);
            trace.argmax.push(arg);
            trace.masks.push(mask);
        }
        trace.acts.push(x);
        Ok(trace)
    }

    /// Logits `[batch, 2]`.
    pub fn forward(&self, batch: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let n = self.batch_rows(batch)?;
        let mut trace = self.run(batch, mode)?;
        Tensor::new(vec![n, NUM_CLASSES], trace.acts.pop().unwrap_or_default())
    }

    /// Mean softmax cross-entropy and its gradient for every parameter.
    pub fn loss_and_grad(&self, batch: &Tensor, labels: &[usize], mode: Mode) -> Result<(f64, Vec<Tensor>), NnError> {
        let (loss, grads, _) = self.step_parts(batch, labels, mode)?;
        Ok((loss, grads))
    }

    /// Loss, gradients and the number of correct argmax predictions.
    pub(crate) fn step_parts(
        &self,
        batch: &Tensor,
        labels: &[usize],
        mode: Mode,
    ) -> Result<(f64, Vec<Tensor>, usize), NnError> {
        let n = self.batch_rows(batch)?;
        if labels.len() != n {
            return Err(NnError::ShapeMismatch { expected: format!("{n} labels"), got: format!("{}", labels.len()) });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= NUM_CLASSES) {
            return Err(NnError::InvalidLabel { index, label });
        }
        let trace = self.run(batch, mode)?;
        let logits = trace.acts.last().expect("logits");

        let mut loss = 0.0;
        let mut correct = 0;
        let mut dy = vec![0.0; n * NUM_CLASSES];
        for (b, &label) in labels.iter().enumerate() {
            let z = &logits[b * NUM_CLASSES..(b + 1) * NUM_CLASSES];
            let probs = softmax(z);
            loss -= probs[label].max(f64::MIN_POSITIVE).ln();
            if argmax(z) == label {
                correct += 1;
            }
            for k in 0..NUM_CLASSES {
                let target = if k == label { 1.0 } else { 0.0 };
                dy[b * NUM_CLASSES + k] = (probs[k] - target) / n as f64;
            }
        }
        loss /= n as f64;

        let ops = plan(&self.config, self.input_shape, &self.shapes);
        let mut grads: Vec<Option<Tensor>> = vec![None; self.params.len()];
        for (i, op) in ops.iter().enumerate().rev() {
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            let need_dx = i > 0;
            dy = match *op {
                Op::Conv { dims, param } => {
                    layers::relu_backward_in_place(&mut dy, output);
                    let (dx, dw, db) = layers::conv_backward(input, &dy, n, dims, self.params[param].data(), need_dx);
                    grads[param] = Some(Tensor::new(self.params[param].shape().to_vec(), dw)?);
                    grads[param + 1] = Some(Tensor::new(self.params[param + 1].shape().to_vec(), db)?);
                    dx.unwrap_or_default()
                }
                Op::Pool { dims } => {
                    if need_dx {
                        layers::pool_backward(&dy, trace.argmax[i].as_deref().expect("argmax"), n, dims)
                    } else {
                        Vec::new()
                    }
                }
                Op::Dense { inputs, param, relu, .. } => {
                    if relu {
                        layers::relu_backward_in_place(&mut dy, output);
                    }
                    let (dx, dw, db) = layers::dense_backward(input, &dy, n, inputs, self.params[param].data(), need_dx);
                    grads[param] = Some(Tensor::new(self.params[param].shape().to_vec(), dw)?);
                    grads[param + 1] = Some(Tensor::new(self.params[param + 1].shape().to_vec(), db)?);
                    dx.unwrap_or_default()
                }
                Op::Dropout { .. } => match &trace.masks[i] {
                    Some(mask) => dy.iter().zip(mask).map(|(g, m)| g * m).collect(),
                    None => dy,
                },
            };
        }
        let grads = grads.into_iter().map(|g| g.expect("every parameter has a gradient")).collect();
        Ok((loss, grads, correct))
    }

    /// One SGD step: `p -= lr * g`.
    pub fn sgd_step(&mut self, grads: &[Tensor], learning_rate: f64) -> Result<(), NnError> {
        if grads.len() != self.params.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} gradients", self.params.len()),
                got: format!("{}", grads.len()),
            });
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            if p.shape() != g.shape() {
                return Err(NnError::ShapeMismatch {
                    expected: format!("{:?}", p.shape()),
                    got: format!("{:?}", g.shape()),
                });
            }
            for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                *w -= learning_rate * d;
            }
        }
        Ok(())
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// First index of the largest value.
pub(crate) fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}
