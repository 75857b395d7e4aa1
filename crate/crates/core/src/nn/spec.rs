use serde::{Deserialize, Serialize};

use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Convolution {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    FullyConnected {
        outputs: usize,
    },
    Relu,
    Flatten,
}

/// One layer plus the dropout rate applied to its input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn conv(filters: usize, kernel: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::Convolution {
                filters,
                kernel,
                stride,
            },
            dropout_rate: 0.0,
        }
    }

    pub fn fc(outputs: usize) -> Self {
        Self {
            kind: LayerKind::FullyConnected { outputs },
            dropout_rate: 0.0,
        }
    }

    pub fn relu() -> Self {
        Self {
            kind: LayerKind::Relu,
            dropout_rate: 0.0,
        }
    }

    pub fn flatten() -> Self {
        Self {
            kind: LayerKind::Flatten,
            dropout_rate: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawSpec {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    num_classes: usize,
}

/// Shapes and parameter offsets derived once from the layer list.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerPlan {
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub param_offset: usize,
    pub param_count: usize,
}

impl LayerPlan {
    pub fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }
}

/// A validated layer stack. Construction checks that consecutive shapes compose and
/// that the last layer emits `num_classes` logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct NetworkSpec {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    num_classes: usize,
    plan: Vec<LayerPlan>,
}

impl From<NetworkSpec> for RawSpec {
    fn from(s: NetworkSpec) -> Self {
        RawSpec {
            input_shape: s.input_shape,
            layers: s.layers,
            num_classes: s.num_classes,
        }
    }
}

impl TryFrom<RawSpec> for NetworkSpec {
    type Error = NnError;

    fn try_from(raw: RawSpec) -> Result<Self> {
        NetworkSpec::new(raw.input_shape, raw.layers, raw.num_classes)
    }
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>, num_classes: usize) -> Result<Self> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(NnError::InvalidSpec(format!("bad input shape {input_shape:?}")));
        }
        if num_classes == 0 {
            return Err(NnError::InvalidSpec("num_classes must be positive".into()));
        }
        let mut plan = Vec::with_capacity(layers.len());
        let mut shape = input_shape.clone();
        let mut offset = 0;
        for (i, layer) in layers.iter().enumerate() {
            if !(0.0..1.0).contains(&layer.dropout_rate) {
                return Err(NnError::InvalidSpec(format!(
                    "layer {i}: dropout rate {} outside [0, 1)",
                    layer.dropout_rate
                )));
            }
            let in_len: usize = shape.iter().product();
            let (out_shape, count) = match layer.kind {
                LayerKind::Convolution {
                    filters,
                    kernel,
                    stride,
                } => {
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {i}: filters, kernel and stride must be positive"
                        )));
                    }
                    let [h, w, c] = shape[..] else {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {i}: convolution needs a [rows, cols, channels] input, got {shape:?}"
                        )));
                    };
                    if kernel > h || kernel > w {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {i}: kernel {kernel} larger than input {h}x{w}"
                        )));
                    }
                    let oh = (h - kernel) / stride + 1;
                    let ow = (w - kernel) / stride + 1;
                    (vec![oh, ow, filters], filters * kernel * kernel * c + filters)
                }
                LayerKind::FullyConnected { outputs } => {
                    if outputs == 0 {
                        return Err(NnError::InvalidSpec(format!("layer {i}: zero outputs")));
                    }
                    if shape.len() != 1 {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {i}: fully-connected layer needs a flat input, got {shape:?}"
                        )));
                    }
                    (vec![outputs], outputs * in_len + outputs)
                }
                LayerKind::Relu => (shape.clone(), 0),
                LayerKind::Flatten => (vec![in_len], 0),
            };
            plan.push(LayerPlan {
                in_shape: shape,
                out_shape: out_shape.clone(),
                param_offset: offset,
                param_count: count,
            });
            offset += count;
            shape = out_shape;
        }
        if shape != [num_classes] {
            return Err(NnError::InvalidSpec(format!(
                "network emits {shape:?}, expected [{num_classes}] logits"
            )));
        }
        Ok(Self {
            input_shape,
            layers,
            num_classes,
            plan,
        })
    }

    /// Feature extractor and Bayesian head used by the steering controllers.
    ///
    /// conv(8,5,2) relu conv(12,5,2) relu conv(16,3,2) relu flatten fc(64) relu form
    /// the fixed extractor; the head is fc(50) relu fc(30) relu fc(16) relu fc(K),
    /// with `rates` applied to the inputs of its first three layers.
    pub fn steering(num_classes: usize, rates: [f64; 3]) -> Result<Self> {
        let mut layers = Self::extractor_layers();
        layers.extend(Self::head_layers(num_classes, rates));
        Self::new(vec![48, 64, 1], layers, num_classes)
    }

    /// The head on its own, taking 64-dimensional features.
    pub fn steering_head(num_classes: usize, rates: [f64; 3]) -> Result<Self> {
        Self::new(vec![64], Self::head_layers(num_classes, rates), num_classes)
    }

    /// Number of leading layers of [`NetworkSpec::steering`] that make up the extractor.
    pub const STEERING_EXTRACTOR_LAYERS: usize = 9;

    fn extractor_layers() -> Vec<LayerSpec> {
        vec![
            LayerSpec::conv(8, 5, 2),
            LayerSpec::relu(),
            LayerSpec::conv(12, 5, 2),
            LayerSpec::relu(),
            LayerSpec::conv(16, 3, 2),
            LayerSpec::relu(),
            LayerSpec::flatten(),
            LayerSpec::fc(64),
            LayerSpec::relu(),
        ]
    }

    fn head_layers(num_classes: usize, rates: [f64; 3]) -> Vec<LayerSpec> {
        vec![
            LayerSpec::fc(50).with_dropout(rates[0]),
            LayerSpec::relu(),
            LayerSpec::fc(30).with_dropout(rates[1]),
            LayerSpec::relu(),
            LayerSpec::fc(16).with_dropout(rates[2]),
            LayerSpec::relu(),
            LayerSpec::fc(num_classes),
        ]
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn param_count(&self) -> usize {
        self.plan.last().map_or(0, |p| p.param_offset + p.param_count)
    }

    pub(crate) fn plan(&self) -> &[LayerPlan] {
        &self.plan
    }

    /// Output shape of layer `index`.
    pub fn output_shape(&self, index: usize) -> &[usize] {
        &self.plan[index].out_shape
    }

    /// Splits into the first `at` layers and the rest, along with the number of
    /// parameters owned by the front part. The front part's `num_classes` is its
    /// flattened output width.
    pub fn split(&self, at: usize) -> Result<(NetworkSpec, NetworkSpec, usize)> {
        if at == 0 || at >= self.layers.len() {
            return Err(NnError::InvalidSpec(format!(
                "split point {at} must fall strictly inside {} layers",
                self.layers.len()
            )));
        }
        let mid_shape = self.plan[at - 1].out_shape.clone();
        let mid_len: usize = mid_shape.iter().product();
        let mut front_layers = self.layers[..at].to_vec();
        if mid_shape.len() != 1 {
            front_layers.push(LayerSpec::flatten());
        }
        let front = NetworkSpec::new(self.input_shape.clone(), front_layers, mid_len)?;
        let back = NetworkSpec::new(vec![mid_len], self.layers[at..].to_vec(), self.num_classes)?;
        let front_params = self.plan[at].param_offset;
        Ok((front, back, front_params))
    }

    /// Index of every layer with a positive dropout rate.
    pub fn dropout_layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.dropout_rate > 0.0)
            .map(|(i, _)| i)
    }

    /// Per-parameter index of the layer that owns it.
    pub fn param_layer_index(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.param_count());
        for (i, p) in self.plan.iter().enumerate() {
            out.extend(std::iter::repeat_n(i, p.param_count));
        }
        out
    }

    pub(crate) fn layer_input_len(&self, index: usize) -> usize {
        self.plan[index].in_len()
    }
}
