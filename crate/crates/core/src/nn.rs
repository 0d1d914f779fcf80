//! Dense multinomial classifier: tanh hidden layers, softmax head,
//! cross-entropy loss and plain mini-batch SGD.
//!
//! Parameters live in one flat `f64` vector. For every layer, in order, the
//! weights come first (row-major, shape `(out_dim, in_dim)`) followed by the
//! `out_dim` biases.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use thiserror::Error;

use crate::data::LabeledDataset;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("model has no layers")]
    NoLayers,
    #[error("layer {layer} has a zero dimension")]
    ZeroDim { layer: usize },
    #[error("layer {layer} expects {expected} inputs but previous layer produces {got}")]
    LayerMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter shapes differ")]
    ShapeMismatch,
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} output classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training spec: {0}")]
    InvalidSpec(&'static str),
    #[error("parameters became non-finite")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, NnError>;

/// `(in_dim, out_dim)` of one dense layer.
pub type LayerShape = (usize, usize);

/// Number of scalars needed to store a model with these layers.
pub fn param_count(layer_shapes: &[LayerShape]) -> usize {
    layer_shapes.iter().map(|&(i, o)| i * o + o).sum()
}

fn check_shapes(layer_shapes: &[LayerShape]) -> Result<()> {
    if layer_shapes.is_empty() {
        return Err(NnError::NoLayers);
    }
    for (layer, &(i, o)) in layer_shapes.iter().enumerate() {
        if i == 0 || o == 0 {
            return Err(NnError::ZeroDim { layer });
        }
        if layer > 0 {
            let prev = layer_shapes[layer - 1].1;
            if prev != i {
                return Err(NnError::LayerMismatch {
                    layer,
                    expected: i,
                    got: prev,
                });
            }
        }
    }
    Ok(())
}

/// Flat parameter vector of a dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layer_shapes: Vec<LayerShape>,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(layer_shapes: &[LayerShape]) -> Result<Self> {
        check_shapes(layer_shapes)?;
        Ok(Self {
            layer_shapes: layer_shapes.to_vec(),
            values: vec![0.0; param_count(layer_shapes)],
        })
    }

    pub fn from_values(layer_shapes: &[LayerShape], values: Vec<f64>) -> Result<Self> {
        check_shapes(layer_shapes)?;
        let expected = param_count(layer_shapes);
        if values.len() != expected {
            return Err(NnError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite);
        }
        Ok(Self {
            layer_shapes: layer_shapes.to_vec(),
            values,
        })
    }

    pub fn layer_shapes(&self) -> &[LayerShape] {
        &self.layer_shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_shapes[0].0
    }

    pub fn output_dim(&self) -> usize {
        self.layer_shapes[self.layer_shapes.len() - 1].1
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layer_shapes == other.layer_shapes
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(NnError::ShapeMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Offsets of (weights, biases) for layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = param_count(&self.layer_shapes[..l]);
        let (i, o) = self.layer_shapes[l];
        (start, start + i * o)
    }

    /// Weight matrix of layer `l`, row-major `(out_dim, in_dim)`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = self.layer_offsets(l);
        &self.values[w..b]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b) = self.layer_offsets(l);
        &self.values[b..b + self.layer_shapes[l].1]
    }
}

/// Partial derivatives of the mean batch loss, laid out like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    layer_shapes: Vec<LayerShape>,
    values: Vec<f64>,
}

impl Gradient {
    pub fn layer_shapes(&self) -> &[LayerShape] {
        &self.layer_shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Hyper-parameters of local SGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(NnError::InvalidSpec("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidSpec("batch_size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(NnError::InvalidSpec("learning_rate must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Weights uniform in `[-1/sqrt(in_dim), 1/sqrt(in_dim)]`, biases zero.
pub fn init_model(layer_shapes: &[LayerShape], seed: u64) -> Result<ModelParams> {
    let mut model = ModelParams::zeros(layer_shapes)?;
    let mut rng = rng::stream(&[rng::tag::INIT, seed]);
    for l in 0..layer_shapes.len() {
        let (in_dim, out_dim) = layer_shapes[l];
        let bound = 1.0 / (in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let (w, _) = model.layer_offsets(l);
        for v in &mut model.values[w..w + in_dim * out_dim] {
            *v = dist.sample(&mut rng);
        }
    }
    Ok(model)
}

/// Runs the network and keeps every layer's activation; the last entry holds
/// the raw logits.
fn forward_trace(model: &ModelParams, features: &[f64], acts: &mut Vec<Vec<f64>>) {
    let layers = model.layer_shapes.len();
    acts.resize(layers + 1, Vec::new());
    acts[0].clear();
    acts[0].extend_from_slice(features);
    for l in 0..layers {
        let (in_dim, out_dim) = model.layer_shapes[l];
        let w = model.weights(l);
        let b = model.biases(l);
        let (prev, rest) = acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut rest[0];
        out.clear();
        for o in 0..out_dim {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let z: f64 = b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
            out.push(if l + 1 < layers { z.tanh() } else { z });
        }
    }
}

fn check_input(model: &ModelParams, features: &[f64]) -> Result<()> {
    if features.len() != model.input_dim() {
        return Err(NnError::DimensionMismatch {
            expected: model.input_dim(),
            got: features.len(),
        });
    }
    Ok(())
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|z| (z - lse).exp()).collect()
}

/// Raw output-layer scores for one sample.
pub fn logits(model: &ModelParams, features: &[f64]) -> Result<Vec<f64>> {
    check_input(model, features)?;
    let mut acts = Vec::new();
    forward_trace(model, features, &mut acts);
    Ok(acts.pop().expect("at least one layer"))
}

/// Class probabilities for one sample.
pub fn forward(model: &ModelParams, features: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&logits(model, features)?))
}

fn check_dataset(model: &ModelParams, data: &LabeledDataset) -> Result<()> {
    if data.dim() != model.input_dim() {
        return Err(NnError::DimensionMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    if let Some(&label) = data.labels().iter().find(|&&y| y >= model.output_dim()) {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: model.output_dim(),
        });
    }
    Ok(())
}

/// Mean cross-entropy over `data[indices]` and its exact gradient.
pub fn loss_and_grad(
    model: &ModelParams,
    data: &LabeledDataset,
    indices: &[usize],
) -> Result<(f64, Gradient)> {
    if indices.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    check_dataset(model, data)?;
    Ok(batch_loss_and_grad(model, data, indices))
}

/// [`loss_and_grad`] over every sample of `data`.
pub fn dataset_loss_and_grad(model: &ModelParams, data: &LabeledDataset) -> Result<(f64, Gradient)> {
    let all: Vec<usize> = (0..data.len()).collect();
    loss_and_grad(model, data, &all)
}

fn batch_loss_and_grad(model: &ModelParams, data: &LabeledDataset, indices: &[usize]) -> (f64, Gradient) {
    let layers = model.layer_shapes.len();
    let mut grad = vec![0.0; model.values.len()];
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
    let mut delta: Vec<f64> = Vec::new();
    let mut delta_prev: Vec<f64> = Vec::new();
    let mut loss_sum = 0.0;

    for &idx in indices {
        let label = data.label(idx);
        forward_trace(model, data.features(idx), &mut acts);
        let z = &acts[layers];
        let lse = log_sum_exp(z);
        loss_sum += lse - z[label];

        delta.clear();
        delta.extend(z.iter().map(|v| (v - lse).exp()));
        delta[label] -= 1.0;

        for l in (0..layers).rev() {
            let (in_dim, out_dim) = model.layer_shapes[l];
            let (w_off, b_off) = model.layer_offsets(l);
            let input = &acts[l];
            for o in 0..out_dim {
                let d = delta[o];
                let row = &mut grad[w_off + o * in_dim..w_off + (o + 1) * in_dim];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[b_off + o] += d;
            }
            if l > 0 {
                let w = model.weights(l);
                delta_prev.clear();
                delta_prev.resize(in_dim, 0.0);
                for o in 0..out_dim {
                    let d = delta[o];
                    for (dp, wv) in delta_prev.iter_mut().zip(&w[o * in_dim..(o + 1) * in_dim]) {
                        *dp += wv * d;
                    }
                }
                for (dp, a) in delta_prev.iter_mut().zip(input) {
                    *dp *= 1.0 - a * a;
                }
                std::mem::swap(&mut delta, &mut delta_prev);
            }
        }
    }

    let n = indices.len() as f64;
    for g in &mut grad {
        *g /= n;
    }
    (
        loss_sum / n,
        Gradient {
            layer_shapes: model.layer_shapes.clone(),
            values: grad,
        },
    )
}

/// One SGD update, `params - lr * grad`, element-wise.
pub fn sgd_step(model: &mut ModelParams, grad: &Gradient, learning_rate: f64) -> Result<()> {
    if model.layer_shapes != grad.layer_shapes {
        return Err(NnError::ShapeMismatch);
    }
    for (p, g) in model.values.iter_mut().zip(&grad.values) {
        *p -= learning_rate * g;
    }
    Ok(())
}

/// Mini-batch SGD for `spec.epochs` passes over `data`, reshuffling with
/// `rng` every epoch. The last batch of an epoch may be short.
pub fn train<R: Rng + ?Sized>(
    model: &ModelParams,
    data: &LabeledDataset,
    spec: &TrainSpec,
    rng: &mut R,
) -> Result<ModelParams> {
    spec.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    check_dataset(model, data)?;

    let mut out = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..spec.epochs {
        order.shuffle(rng);
        for batch in order.chunks(spec.batch_size) {
            let (_, grad) = batch_loss_and_grad(&out, data, batch);
            sgd_step(&mut out, &grad, spec.learning_rate)?;
        }
    }
    if !out.is_finite() {
        return Err(NnError::NonFinite);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Top-1 accuracy (argmax, lowest index wins ties) and mean cross-entropy.
pub fn evaluate(model: &ModelParams, data: &LabeledDataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    check_dataset(model, data)?;
    let mut acts = Vec::new();
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for idx in 0..data.len() {
        forward_trace(model, data.features(idx), &mut acts);
        let z = acts.last().expect("logits");
        let label = data.label(idx);
        if argmax(z) == label {
            correct += 1;
        }
        loss_sum += log_sum_exp(z) - z[label];
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_loss: loss_sum / n,
    })
}
