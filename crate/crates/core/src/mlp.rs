//! Feed-forward network trainer.
//!
//! A small fully-connected regressor (default 120 -> 6 -> 3 -> 1, tanh
//! hidden activations, identity output) trained with mini-batch Adam. The
//! output-layer error signal is the pluggable objective's gradient, so the
//! band-weighted loss steers backpropagation exactly as it steers tree
//! growth.
//!
//! Inputs are standardized per feature and the target is standardized too,
//! both fit on the training split only; predictions are mapped back to
//! degrees C before the objective sees them, so band thresholds apply on
//! the real scale. Batch gradients are plain sums over the batch.
//!
//! Training is single-threaded and deterministic: weight init and epoch
//! shuffling draw from labeled streams of the run seed.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::{LossConfig, Objective};
use crate::model_file::{self, ModelFileError};
use crate::pipeline::WindowSample;
use crate::seed::rng_for;

pub const MODEL_KIND: &str = "mlp";

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite loss in epoch {epoch}, batch {batch}; try a lower learning rate")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter vector has {found} values, model has {expected}")]
    ParameterCountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
}

/// Network and optimizer hyperparameters. `hidden_sizes` lists the hidden
/// layers only; a one-node linear output layer is always appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![6, 3],
            learning_rate: 0.001,
            batch_size: 2000,
            epochs: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<(), MlpError> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(MlpError::InvalidParams(
                "hidden_sizes must be non-empty with positive sizes".to_string(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MlpError::InvalidParams(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(MlpError::InvalidParams("batch_size must be at least 1".to_string()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(MlpError::InvalidParams(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.adam_eps <= 0.0 {
            return Err(MlpError::InvalidParams("adam_eps must be positive".to_string()));
        }
        Ok(())
    }
}

/// One dense layer, row-major weights of shape `n_out x n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for j in 0..self.n_out {
            let row = &self.weights[j * self.n_in..(j + 1) * self.n_in];
            let mut acc = self.biases[j];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            output.push(acc);
        }
    }

    fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// A trained network with its input/target standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    /// Hidden layers followed by the one-node output layer.
    pub layers: Vec<Layer>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Target standardization; predictions are `mean + std * raw_output`.
    pub target_mean: f64,
    pub target_std: f64,
    /// Hidden activation tag; only "tanh" is produced.
    pub activation: String,
    pub objective: String,
    pub loss_config: LossConfig,
    pub params: MlpParams,
}

/// Scratch buffers reused across forward/backward passes.
struct Scratch {
    /// Standardized input, then post-activation output of each layer.
    acts: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Scratch {
    fn new(model: &MlpModel) -> Self {
        let mut acts = vec![Vec::with_capacity(model.n_features)];
        let mut pre = Vec::new();
        for layer in &model.layers {
            acts.push(Vec::with_capacity(layer.n_out));
            pre.push(Vec::with_capacity(layer.n_out));
        }
        let widest = model
            .layers
            .iter()
            .map(|l| l.n_out.max(l.n_in))
            .max()
            .unwrap_or(1);
        Self {
            acts,
            pre,
            delta: Vec::with_capacity(widest),
            delta_next: Vec::with_capacity(widest),
        }
    }
}

impl MlpModel {
    fn init(
        n_features: usize,
        params: &MlpParams,
        objective_name: &str,
        loss_cfg: &LossConfig,
    ) -> Self {
        let mut rng = rng_for(params.seed, "mlp/init");
        let mut layers = Vec::new();
        let mut n_in = n_features;
        let sizes: Vec<usize> = params.hidden_sizes.iter().copied().chain([1]).collect();
        for n_out in sizes {
            let bound = 1.0 / (n_in as f64).sqrt();
            let weights: Vec<f64> = (0..n_in * n_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            layers.push(Layer {
                n_in,
                n_out,
                weights,
                biases: vec![0.0; n_out],
            });
            n_in = n_out;
        }
        Self {
            n_features,
            layers,
            feature_mean: vec![0.0; n_features],
            feature_std: vec![1.0; n_features],
            target_mean: 0.0,
            target_std: 1.0,
            activation: "tanh".to_string(),
            objective: objective_name.to_string(),
            loss_config: loss_cfg.clone(),
            params: params.clone(),
        }
    }

    fn fit_standardization(&mut self, dataset: &[WindowSample]) {
        let n = dataset.len() as f64;
        for f in 0..self.n_features {
            let mean = dataset.iter().map(|s| s.features[f]).sum::<f64>() / n;
            let var = dataset
                .iter()
                .map(|s| (s.features[f] - mean).powi(2))
                .sum::<f64>()
                / n;
            self.feature_mean[f] = mean;
            self.feature_std[f] = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        }
        let t_mean = dataset.iter().map(|s| s.target).sum::<f64>() / n;
        let t_var = dataset.iter().map(|s| (s.target - t_mean).powi(2)).sum::<f64>() / n;
        self.target_mean = t_mean;
        self.target_std = if t_var.sqrt() < 1e-12 { 1.0 } else { t_var.sqrt() };
    }

    /// Forward pass; fills the scratch activations and returns the
    /// prediction in degrees C.
    fn forward_scratch(&self, features: &[f64], scratch: &mut Scratch) -> f64 {
        scratch.acts[0].clear();
        for ((x, mean), std) in features.iter().zip(&self.feature_mean).zip(&self.feature_std) {
            scratch.acts[0].push((x - mean) / std);
        }
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = scratch.acts.split_at_mut(l + 1);
            layer.forward(&before[l], &mut scratch.pre[l]);
            let out = &mut after[0];
            out.clear();
            if l + 1 < n_layers {
                out.extend(scratch.pre[l].iter().map(|z| z.tanh()));
            } else {
                out.extend_from_slice(&scratch.pre[l]);
            }
        }
        self.target_mean + self.target_std * scratch.acts[n_layers][0]
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64, MlpError> {
        if features.len() != self.n_features {
            return Err(MlpError::DimensionMismatch {
                expected: self.n_features,
                found: features.len(),
            });
        }
        let mut scratch = Scratch::new(self);
        Ok(self.forward_scratch(features, &mut scratch))
    }

    pub fn predict_batch(&self, samples: &[WindowSample]) -> Result<Vec<f64>, MlpError> {
        let mut scratch = Scratch::new(self);
        samples
            .iter()
            .map(|s| {
                if s.features.len() != self.n_features {
                    return Err(MlpError::DimensionMismatch {
                        expected: self.n_features,
                        found: s.features.len(),
                    });
                }
                Ok(self.forward_scratch(&s.features, &mut scratch))
            })
            .collect()
    }

    /// Backward pass for one sample given dJ/dprediction; accumulates
    /// parameter gradients (sums) into `grads`.
    fn backward_scratch(&self, d_pred: f64, scratch: &mut Scratch, grads: &mut [LayerGrads]) {
        let n_layers = self.layers.len();
        // d(pred)/d(raw output) = target_std; output layer is linear.
        scratch.delta.clear();
        scratch.delta.push(d_pred * self.target_std);

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &scratch.acts[l];
            let g = &mut grads[l];
            for j in 0..layer.n_out {
                let d = scratch.delta[j];
                g.biases[j] += d;
                let row = &mut g.weights[j * layer.n_in..(j + 1) * layer.n_in];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if l == 0 {
                break;
            }
            // delta for the previous layer: W^T delta, times tanh'.
            scratch.delta_next.clear();
            for i in 0..layer.n_in {
                let mut acc = 0.0;
                for j in 0..layer.n_out {
                    acc += self.layers[l].weights[j * layer.n_in + i] * scratch.delta[j];
                }
                let h = scratch.acts[l][i];
                acc *= 1.0 - h * h;
                scratch.delta_next.push(acc);
            }
            std::mem::swap(&mut scratch.delta, &mut scratch.delta_next);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.parameter_count()).sum()
    }

    /// All parameters in canonical order: per layer, weights row-major,
    /// then biases.
    pub fn flatten_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn assign_parameters(&mut self, values: &[f64]) -> Result<(), MlpError> {
        if values.len() != self.parameter_count() {
            return Err(MlpError::ParameterCountMismatch {
                expected: self.parameter_count(),
                found: values.len(),
            });
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&values[pos..pos + nw]);
            pos += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&values[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }

    /// Total objective loss over a batch, through the full
    /// standardize-forward-destandardize path.
    pub fn batch_loss(
        &self,
        samples: &[WindowSample],
        objective: &dyn Objective,
    ) -> Result<f64, MlpError> {
        let preds = self.predict_batch(samples)?;
        Ok(preds
            .iter()
            .zip(samples)
            .map(|(&p, s)| objective.loss(p, s.target))
            .sum())
    }

    /// Batch loss together with its exact gradient w.r.t. every parameter,
    /// flattened in canonical order. Gradients are sums over the batch.
    pub fn batch_gradient(
        &self,
        samples: &[WindowSample],
        objective: &dyn Objective,
    ) -> Result<(f64, Vec<f64>), MlpError> {
        let mut scratch = Scratch::new(self);
        let mut grads: Vec<LayerGrads> = self.layers.iter().map(LayerGrads::zeros).collect();
        let mut loss = 0.0;
        for s in samples {
            if s.features.len() != self.n_features {
                return Err(MlpError::DimensionMismatch {
                    expected: self.n_features,
                    found: s.features.len(),
                });
            }
            let pred = self.forward_scratch(&s.features, &mut scratch);
            loss += objective.loss(pred, s.target);
            let d_pred = objective.grad_hess(pred, s.target).grad;
            self.backward_scratch(d_pred, &mut scratch, &mut grads);
        }
        let mut flat = Vec::with_capacity(self.parameter_count());
        for g in &grads {
            flat.extend_from_slice(&g.weights);
            flat.extend_from_slice(&g.biases);
        }
        Ok((loss, flat))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, MlpError> {
        Ok(model_file::to_bytes(MODEL_KIND, self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MlpError> {
        Ok(model_file::from_bytes(MODEL_KIND, bytes)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), MlpError> {
        Ok(model_file::save(path, MODEL_KIND, self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MlpError> {
        Ok(model_file::load(path, MODEL_KIND)?)
    }
}

struct LayerGrads {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl LayerGrads {
    fn zeros(layer: &Layer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            biases: vec![0.0; layer.biases.len()],
        }
    }

    fn reset(&mut self) {
        self.weights.fill(0.0);
        self.biases.fill(0.0);
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Result of a training run: the model plus the total training loss after
/// each epoch.
#[derive(Debug, Clone)]
pub struct MlpTraining {
    pub model: MlpModel,
    pub loss_trace: Vec<f64>,
}

/// Train with mini-batch Adam. Shuffling is seeded and continues one
/// stream across epochs; the last partial batch is used, not dropped.
pub fn train(
    dataset: &[WindowSample],
    objective: &dyn Objective,
    params: &MlpParams,
    loss_cfg: &LossConfig,
) -> Result<MlpTraining, MlpError> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(MlpError::EmptyDataset);
    }
    let n_features = dataset[0].features.len();
    for s in dataset {
        if s.features.len() != n_features {
            return Err(MlpError::DimensionMismatch {
                expected: n_features,
                found: s.features.len(),
            });
        }
    }

    let mut model = MlpModel::init(n_features, params, objective.name(), loss_cfg);
    model.fit_standardization(dataset);

    let mut scratch = Scratch::new(&model);
    let mut grads: Vec<LayerGrads> = model.layers.iter().map(LayerGrads::zeros).collect();
    let mut adam: Vec<(AdamState, AdamState)> = model
        .layers
        .iter()
        .map(|l| {
            (
                AdamState {
                    m: vec![0.0; l.weights.len()],
                    v: vec![0.0; l.weights.len()],
                },
                AdamState {
                    m: vec![0.0; l.biases.len()],
                    v: vec![0.0; l.biases.len()],
                },
            )
        })
        .collect();

    let mut shuffle_rng = rng_for(params.seed, "mlp/shuffle");
    let mut order: Vec<u32> = (0..dataset.len() as u32).collect();
    let mut step = 0u64;
    let mut loss_trace = Vec::with_capacity(params.epochs);

    for epoch in 0..params.epochs {
        order.shuffle(&mut shuffle_rng);
        for (batch_idx, batch) in order.chunks(params.batch_size).enumerate() {
            for g in grads.iter_mut() {
                g.reset();
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &dataset[i as usize];
                let pred = model.forward_scratch(&s.features, &mut scratch);
                batch_loss += objective.loss(pred, s.target);
                let d_pred = objective.grad_hess(pred, s.target).grad;
                model.backward_scratch(d_pred, &mut scratch, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(MlpError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }

            step += 1;
            let bc1 = 1.0 - params.adam_beta1.powi(step as i32);
            let bc2 = 1.0 - params.adam_beta2.powi(step as i32);
            for (l, layer) in model.layers.iter_mut().enumerate() {
                let (w_state, b_state) = &mut adam[l];
                adam_update(
                    &mut layer.weights,
                    &grads[l].weights,
                    w_state,
                    params,
                    bc1,
                    bc2,
                );
                adam_update(&mut layer.biases, &grads[l].biases, b_state, params, bc1, bc2);
            }
        }

        let epoch_loss = model.batch_loss(dataset, objective)?;
        if !epoch_loss.is_finite() {
            return Err(MlpError::NonFiniteLoss { epoch, batch: 0 });
        }
        loss_trace.push(epoch_loss);
    }

    Ok(MlpTraining { model, loss_trace })
}

fn adam_update(
    values: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    params: &MlpParams,
    bias_corr1: f64,
    bias_corr2: f64,
) {
    let b1 = params.adam_beta1;
    let b2 = params.adam_beta2;
    for i in 0..values.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / bias_corr1;
        let v_hat = state.v[i] / bias_corr2;
        values[i] -= params.learning_rate * m_hat / (v_hat.sqrt() + params.adam_eps);
    }
}
