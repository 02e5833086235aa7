//! A small dense feed-forward classifier with manual forward and backward
//! passes — no autograd, just explicit loops.
//!
//! Layers are affine maps with ReLU between hidden layers and identity at the
//! output, so the final activations are raw logits. The activation feeding
//! the output layer (the penultimate activation) is retained on every forward
//! pass for feature export; with the default penultimate width of 2 it can be
//! scatter-plotted directly.
//!
//! # Checkpoint format
//!
//! [`MlpModel::save`] writes a versioned plain-text file, byte-exact:
//!
//! ```text
//! mlp-checkpoint v1\n
//! <layer sizes, space-separated>\n
//! <one parameter per line>\n...
//! ```
//!
//! Parameters appear in layer order; within a layer, the weight matrix in
//! row-major order (output rows over input columns) then the biases. Floats
//! use Rust's shortest round-trip formatting and LF line endings, so
//! save → load → save reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "mlp-checkpoint v1";

/// One affine layer: `weights` is out×in row-major, `biases` has length out.
/// Also used as the per-layer slot of a [`ModelGrad`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Dense multi-layer perceptron. `layer_sizes` is `[D, h1, …, K]`; weights
/// between consecutive sizes, ReLU on all but the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Everything the backward pass needs from a forward pass: per-layer
/// pre-activations and activations, with the logits at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Raw network outputs (the final affine layer has no activation).
    pub fn logits(&self) -> &[f64] {
        self.post.last().expect("trace has at least one layer")
    }

    /// Activation feeding the output layer; the input itself for a
    /// single-layer model.
    pub fn penultimate(&self) -> &[f64] {
        if self.post.len() >= 2 {
            &self.post[self.post.len() - 2]
        } else {
            &self.input
        }
    }
}

/// Parameter gradients, shaped exactly like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub layers: Vec<Layer>,
}

impl ModelGrad {
    /// All-zero gradients shaped like `model`.
    pub fn zeros_like(model: &MlpModel) -> Self {
        ModelGrad {
            layers: model
                .layers
                .iter()
                .map(|layer| Layer {
                    weights: vec![0.0; layer.weights.len()],
                    biases: vec![0.0; layer.biases.len()],
                })
                .collect(),
        }
    }

    /// Accumulates `other` into `self` entrywise.
    pub fn add_assign(&mut self, other: &ModelGrad) {
        for (mine, theirs) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (a, b) in mine.weights.iter_mut().zip(theirs.weights.iter()) {
                *a += b;
            }
            for (a, b) in mine.biases.iter_mut().zip(theirs.biases.iter()) {
                *a += b;
            }
        }
    }

    /// Scales every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.weights {
                *w *= factor;
            }
            for b in &mut layer.biases {
                *b *= factor;
            }
        }
    }
}

impl MlpModel {
    /// Initializes with zero-mean uniform weights on (-1/sqrt(fan_in),
    /// 1/sqrt(fan_in)) and zero biases, deterministically under `seed`
    /// (ChaCha8; weights drawn layer by layer in row-major order). The bound
    /// matches the common dense-layer default; the uniform family keeps early
    /// updates tame on very narrow layers, where a heavy-tailed draw can start
    /// a unit close to dead.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least input and output widths, got {layer_sizes:?}"
            )));
        }
        if let Some(zero) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer {zero} has width 0"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-scale..scale))
                .collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable parameter access for the optimizer (and for perturbation in
    /// gradient-checking tests).
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Width of the activation feeding the output layer.
    pub fn penultimate_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Affine+ReLU composition, identity at the output. Retains every
    /// intermediate for [`MlpModel::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} does not match model input {}",
                input.len(),
                self.input_dim()
            )));
        }
        if let Some(bad) = input.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("input {bad}")));
        }
        let num_layers = self.layers.len();
        let mut pre = Vec::with_capacity(num_layers);
        let mut post = Vec::with_capacity(num_layers);
        let mut x: Vec<f64> = input.to_vec();
        for (index, layer) in self.layers.iter().enumerate() {
            let fan_in = self.layer_sizes[index];
            let fan_out = self.layer_sizes[index + 1];
            let mut z = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
                let mut acc = layer.biases[o];
                for (w, xi) in row.iter().zip(x.iter()) {
                    acc += w * xi;
                }
                z[o] = acc;
            }
            let activated = if index + 1 < num_layers {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(activated.clone());
            x = activated;
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            pre,
            post,
        })
    }

    /// Exact reverse-mode gradients for all weights and biases, given the
    /// loss gradient with respect to the logits.
    pub fn backward(&self, trace: &ForwardTrace, dloss_dlogits: &[f64]) -> Result<ModelGrad> {
        self.check_trace(trace)?;
        if dloss_dlogits.len() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient width {} does not match output {}",
                dloss_dlogits.len(),
                self.output_dim()
            )));
        }
        let mut grad = ModelGrad::zeros_like(self);
        let mut delta: Vec<f64> = dloss_dlogits.to_vec();
        for index in (0..self.layers.len()).rev() {
            let fan_in = self.layer_sizes[index];
            let fan_out = self.layer_sizes[index + 1];
            let layer_input: &[f64] = if index == 0 {
                &trace.input
            } else {
                &trace.post[index - 1]
            };
            let slot = &mut grad.layers[index];
            for o in 0..fan_out {
                let d = delta[o];
                slot.biases[o] = d;
                let row = &mut slot.weights[o * fan_in..(o + 1) * fan_in];
                for (g, xi) in row.iter_mut().zip(layer_input.iter()) {
                    *g = d * xi;
                }
            }
            if index > 0 {
                let weights = &self.layers[index].weights;
                let mut upstream = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    for (u, w) in upstream.iter_mut().zip(row.iter()) {
                        *u += w * d;
                    }
                }
                // ReLU gate: pass gradient only where the pre-activation was
                // positive (subgradient 0 at exactly 0).
                for (u, z) in upstream.iter_mut().zip(trace.pre[index - 1].iter()) {
                    if *z <= 0.0 {
                        *u = 0.0;
                    }
                }
                delta = upstream;
            }
        }
        Ok(grad)
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        let ok = trace.input.len() == self.input_dim()
            && trace.pre.len() == self.layers.len()
            && trace.post.len() == self.layers.len()
            && trace
                .pre
                .iter()
                .zip(self.layer_sizes.iter().skip(1))
                .all(|(z, &width)| z.len() == width)
            && trace
                .post
                .iter()
                .zip(self.layer_sizes.iter().skip(1))
                .all(|(a, &width)| a.len() == width);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "stale trace: shapes do not match this model".into(),
            ))
        }
    }

    /// Predicted class: argmax over logits, ties broken by lowest index.
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        let trace = self.forward(input)?;
        Ok(argmax_lowest(trace.logits()))
    }

    /// Serializes to the documented checkpoint text.
    pub fn checkpoint_string(&self) -> Result<String> {
        let mut text = String::new();
        text.push_str(CHECKPOINT_MAGIC);
        text.push('\n');
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        text.push_str(&sizes.join(" "));
        text.push('\n');
        for layer in &self.layers {
            for &w in layer.weights.iter().chain(layer.biases.iter()) {
                if !w.is_finite() {
                    return Err(Error::NonFinite(format!("parameter {w}")));
                }
                let _ = writeln!(text, "{w}");
            }
        }
        Ok(text)
    }

    /// Parses the documented checkpoint text.
    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let magic = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("empty file".into()))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "unrecognized header {magic:?} (expected {CHECKPOINT_MAGIC:?})"
            )));
        }
        let sizes_line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("missing layer sizes".into()))?;
        let layer_sizes: Vec<usize> = sizes_line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Checkpoint(format!("bad layer size {tok:?}")))
            })
            .collect::<Result<_>>()?;
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Checkpoint(format!(
                "implausible layer sizes {layer_sizes:?}"
            )));
        }
        let mut values = lines.filter(|l| !l.is_empty()).map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Checkpoint(format!("bad parameter {l:?}")))
        });
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut take = |n: usize| -> Result<Vec<f64>> {
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    let v = values
                        .next()
                        .ok_or_else(|| Error::Checkpoint("truncated parameter list".into()))??;
                    if !v.is_finite() {
                        return Err(Error::Checkpoint(format!("non-finite parameter {v}")));
                    }
                    out.push(v);
                }
                Ok(out)
            };
            let weights = take(fan_in * fan_out)?;
            let biases = take(fan_out)?;
            layers.push(Layer { weights, biases });
        }
        if values.next().is_some() {
            return Err(Error::Checkpoint("trailing parameters".into()));
        }
        Ok(MlpModel {
            layer_sizes,
            layers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.checkpoint_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint_str(&text)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
