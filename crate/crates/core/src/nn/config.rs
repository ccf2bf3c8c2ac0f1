use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of output classes (real, imagined).
pub const NUM_CLASSES: usize = 2;

/// One hidden layer in the notation of the architecture search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerSpec {
    /// Valid 2D convolution, stride 1, followed by ReLU.
    Conv { filters: usize, kh: usize, kw: usize },
    /// Max pooling with its own stride.
    Pool { kh: usize, kw: usize, stride: usize },
    /// Fully connected layer over the flattened input, followed by ReLU.
    Fc { units: usize },
    /// Inverted dropout; identity at evaluation.
    Dropout { keep_prob: f64 },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv { filters, kh, kw } => write!(f, "conv({filters},{kh}x{kw})"),
            LayerSpec::Pool { kh, kw, stride } => write!(f, "pool({kh}x{kw},{stride})"),
            LayerSpec::Fc { units } => write!(f, "fc({units})"),
            LayerSpec::Dropout { keep_prob } => write!(f, "dropout({keep_prob})"),
        }
    }
}

impl std::str::FromStr for LayerSpec {
    type Err = String;

    /// Parses the rendered notation, e.g. `conv(61,5x5)`, `pool(4x4, 2)`,
    /// `fc(828)`, `dropout(0.71)`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("cannot parse layer `{s}`");
        let (kind, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(bad)?.split(',').map(str::trim).collect();
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad());
        let kernel = |v: &str| -> Result<(usize, usize), String> {
            let (h, w) = v.split_once(['x', 'X']).ok_or_else(bad)?;
            Ok((int(h.trim())?, int(w.trim())?))
        };
        match (kind.trim().to_ascii_lowercase().as_str(), args.as_slice()) {
            ("conv", [f, k]) => {
                let (kh, kw) = kernel(k)?;
                Ok(LayerSpec::Conv { filters: int(f)?, kh, kw })
            }
            ("pool", [k, stride]) => {
                let (kh, kw) = kernel(k)?;
                Ok(LayerSpec::Pool { kh, kw, stride: int(stride)? })
            }
            ("fc", [u]) => Ok(LayerSpec::Fc { units: int(u)? }),
            ("dropout", [p]) => Ok(LayerSpec::Dropout { keep_prob: p.parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }
}

/// Hidden layers plus learning rate. The 2-unit output layer is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_layers: Vec<LayerSpec>,
    pub learning_rate: f64,
}

impl ModelConfig {
    /// Builds a config from the rendered layer list, e.g.
    /// `conv(61,5x5), conv(69,8x8), pool(5x5,2)`.
    pub fn parse_layers(text: &str, learning_rate: f64) -> Result<Self, String> {
        let mut hidden_layers = Vec::new();
        let mut depth = 0;
        let mut start = 0;
        for (i, c) in text.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    hidden_layers.push(text[start..i].parse()?);
                    start = i + 1;
                }
                _ => {}
            }
        }
        if !text[start..].trim().is_empty() {
            hidden_layers.push(text[start..].parse()?);
        }
        Ok(Self { hidden_layers, learning_rate })
    }

    /// Hidden layers as `conv(61,5x5), conv(69,8x8), pool(5x5,2)`.
    pub fn render(&self) -> String {
        self.hidden_layers.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    }
}

/// Activation shape of a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Map { channels: usize, height: usize, width: usize },
    Flat(usize),
}

impl Shape {
    pub fn map(channels: usize, height: usize, width: usize) -> Self {
        Shape::Map { channels, height, width }
    }

    pub fn size(&self) -> usize {
        match *self {
            Shape::Map { channels, height, width } => channels * height * width,
            Shape::Flat(n) => n,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Map { channels, height, width } => write!(f, "({channels},{height},{width})"),
            Shape::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// Why a configuration cannot be built on a given input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasible {
    /// Hidden layer index, `None` for whole-config problems.
    pub layer: Option<usize>,
    pub reason: String,
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Some(i) => write!(f, "layer {i}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

impl std::error::Error for Infeasible {}

/// Output shape of every hidden layer followed by the implicit output layer.
///
/// Convolutions are valid with stride 1; pooling gives
/// `floor((h - kh) / stride) + 1`. Spatial layers after a flatten and any
/// non-positive dimension are infeasible.
pub fn infer_shapes(config: &ModelConfig, input: Shape) -> Result<Vec<Shape>, Infeasible> {
    let whole = |reason: String| Infeasible { layer: None, reason };
    if config.hidden_layers.is_empty() {
        return Err(whole("no hidden layers".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(whole(format!("learning rate {}", config.learning_rate)));
    }
    if input.size() == 0 {
        return Err(whole(format!("empty input {input}")));
    }
    let mut shapes = Vec::with_capacity(config.hidden_layers.len() + 1);
    let mut cur = input;
    for (i, layer) in config.hidden_layers.iter().enumerate() {
        let fail = |reason: String| Infeasible { layer: Some(i), reason };
        cur = match (*layer, cur) {
            (LayerSpec::Conv { filters, kh, kw }, Shape::Map { height, width, .. }) => {
                if filters == 0 || kh == 0 || kw == 0 {
                    return Err(fail(format!("{layer} has a zero attribute")));
                }
                if kh > height || kw > width {
                    return Err(fail(format!("{layer} kernel exceeds input {cur}")));
                }
                Shape::map(filters, height - kh + 1, width - kw + 1)
            }
            (LayerSpec::Pool { kh, kw, stride }, Shape::Map { channels, height, width }) => {
                if kh == 0 || kw == 0 || stride == 0 {
                    return Err(fail(format!("{layer} has a zero attribute")));
                }
                if kh > height || kw > width {
                    return Err(fail(format!("{layer} window exceeds input {cur}")));
                }
                Shape::map(channels, (height - kh) / stride + 1, (width - kw) / stride + 1)
            }
            (LayerSpec::Conv { .. } | LayerSpec::Pool { .. }, Shape::Flat(_)) => {
                return Err(fail(format!("{layer} after a fully connected layer")));
            }
            (LayerSpec::Fc { units }, _) => {
                if units == 0 {
                    return Err(fail("fc(0)".into()));
                }
                Shape::Flat(units)
            }
            (LayerSpec::Dropout { keep_prob }, s) => {
                if !(keep_prob > 0.0 && keep_prob <= 1.0) {
                    return Err(fail(format!("keep probability {keep_prob} outside (0, 1]")));
                }
                s
            }
        };
        shapes.push(cur);
    }
    shapes.push(Shape::Flat(NUM_CLASSES));
    Ok(shapes)
}

/// Number of weights and biases of a configuration; 0 when infeasible.
pub fn parameter_count(config: &ModelConfig, input: Shape) -> usize {
    let Ok(shapes) = infer_shapes(config, input) else {
        return 0;
    };
    let mut prev = input;
    let mut total = 0;
    let layers = config.hidden_layers.iter().map(Some).chain(std::iter::once(None));
    for (layer, &out) in layers.zip(&shapes) {
        total += match (layer, prev) {
            (Some(LayerSpec::Conv { filters, kh, kw }), Shape::Map { channels, .. }) => {
                filters * channels * kh * kw + filters
            }
            (Some(LayerSpec::Fc { .. }) | None, p) => p.size() * out.size() + out.size(),
            _ => 0,
        };
        prev = out;
    }
    total
}
