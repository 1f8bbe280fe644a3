//! Multi-quantile regression with a small feed-forward network.
//!
//! One model carries three output heads estimating the conditional quantiles
//! at `quantile_levels` (by default α/2, 0.5, 1−α/2). Each head h is fit by
//! minimizing the pinball loss at its level τ_h,
//!
//! ```text
//! ρ_τ(y, f(x)) = max(τ·ε, (τ−1)·ε),   ε = y − f(x)
//! ```
//!
//! summed over heads, plus an optional squared-parameter penalty. Training is
//! plain mini-batch SGD with a fixed learning rate, fully determined by the
//! seed: weight init, batch order, and updates all draw from one seeded
//! stream, so two runs with the same data and config agree bitwise.
//!
//! Estimated quantiles can cross; `predict` sorts the three heads ("monotonic
//! repair") so every [`QuantilePrediction`] satisfies lower ≤ median ≤ upper.

use std::path::Path;

use rand::Rng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

const MODEL_FORMAT_VERSION: u32 = 1;

/// Pinball (quantile) loss at `level` for a single prediction.
///
/// Returns `max(level·ε, (level−1)·ε)` with `ε = y − prediction`; zero
/// exactly when `ε = 0`.
pub fn pinball_loss(level: f64, y: f64, prediction: f64) -> f64 {
    let eps = y - prediction;
    (level * eps).max((level - 1.0) * eps)
}

/// Derivative of [`pinball_loss`] with respect to `prediction`.
///
/// At the kink `ε = 0` the subgradient from the `(level−1)·ε` branch is
/// used, giving `1 − level`; the choice is arbitrary but fixed.
pub fn pinball_grad(level: f64, y: f64, prediction: f64) -> f64 {
    let eps = y - prediction;
    if eps > 0.0 {
        -level
    } else {
        1.0 - level
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Network shape, optimizer settings, and quantile levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileNetConfig {
    /// Units per hidden layer.
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Coefficient of the squared-parameter penalty added to the loss.
    pub weight_decay: f64,
    pub seed: u64,
    /// Strictly increasing levels in (0,1) for the (lower, median, upper) heads.
    pub quantile_levels: [f64; 3],
}

impl Default for QuantileNetConfig {
    fn default() -> Self {
        QuantileNetConfig {
            hidden_layers: vec![64, 64],
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 64,
            weight_decay: 0.0,
            seed: 0,
            quantile_levels: [0.05, 0.5, 0.95],
        }
    }
}

impl QuantileNetConfig {
    /// Default config with heads at α/2, 0.5 and 1−α/2.
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        Ok(QuantileNetConfig {
            quantile_levels: [alpha / 2.0, 0.5, 1.0 - alpha / 2.0],
            ..QuantileNetConfig::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer sizes must be positive".to_string(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive and finite".to_string(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be ≥ 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be ≥ 1".to_string()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(
                "weight_decay must be non-negative and finite".to_string(),
            ));
        }
        let [lo, mid, hi] = self.quantile_levels;
        if !(lo > 0.0 && lo < mid && mid < hi && hi < 1.0) {
            return Err(Error::InvalidConfig(
                "quantile_levels must be strictly increasing within (0,1)".to_string(),
            ));
        }
        Ok(())
    }
}

/// One fully connected layer; weights are row-major `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    fan_in: usize,
    fan_out: usize,
}

impl Layer {
    fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Layer {
            weights,
            biases: vec![0.0; fan_out],
            fan_in,
            fan_out,
        }
    }

    fn zeros_like(&self) -> Layer {
        Layer {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
            fan_in: self.fan_in,
            fan_out: self.fan_out,
        }
    }
}

/// Three estimated conditional quantiles for one input, sorted ascending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePrediction {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl QuantilePrediction {
    /// Width of the quantile band, `upper − lower`.
    pub fn band_width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Trained three-head quantile regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    layers: Vec<Layer>,
    config: QuantileNetConfig,
    input_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    input_dim: usize,
    config: QuantileNetConfig,
    layers: Vec<Layer>,
}

impl QuantileModel {
    fn init(input_dim: usize, config: QuantileNetConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&config.hidden_layers);
        dims.push(3);
        let layers = dims
            .windows(2)
            .map(|w| Layer::init(w[0], w[1], rng))
            .collect();
        QuantileModel {
            layers,
            config,
            input_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &QuantileNetConfig {
        &self.config
    }

    /// Activations per layer, input included; hidden layers ReLU, output linear.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.layers.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        for (idx, layer) in self.layers.iter().enumerate() {
            let input: &[f64] = &acts[idx];
            let last = idx + 1 == n_layers;
            let mut out = Vec::with_capacity(layer.fan_out);
            for o in 0..layer.fan_out {
                let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                let mut z = layer.biases[o];
                for (w, xi) in row.iter().zip(input.iter()) {
                    z += w * xi;
                }
                out.push(if last { z } else { relu(z) });
            }
            acts.push(out);
        }
        acts
    }

    /// Raw head outputs in head order (lower, median, upper level), unrepaired.
    fn raw_heads(&self, x: &[f64]) -> [f64; 3] {
        let acts = self.forward(x);
        let out = acts.last().unwrap();
        [out[0], out[1], out[2]]
    }

    /// Predicts the three conditional quantiles for `x`, after monotonic
    /// repair (the heads are sorted, which changes order but never the
    /// multiset of values).
    pub fn predict(&self, x: &[f64]) -> Result<QuantilePrediction> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut heads = self.raw_heads(x);
        heads.sort_by(|a, b| a.partial_cmp(b).expect("finite head outputs"));
        Ok(QuantilePrediction {
            lower: heads[0],
            median: heads[1],
            upper: heads[2],
        })
    }

    /// Training objective on `d`: the sum over heads of mean pinball loss at
    /// the head's level, plus the weight-decay penalty.
    pub fn objective(&self, d: &Dataset) -> Result<f64> {
        if d.n_features() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: d.n_features(),
            });
        }
        let levels = self.config.quantile_levels;
        let mut head_sums = [0.0f64; 3];
        for i in 0..d.n_rows() {
            let heads = self.raw_heads(d.row(i));
            let y = d.response()[i];
            for h in 0..3 {
                head_sums[h] += pinball_loss(levels[h], y, heads[h]);
            }
        }
        let n = d.n_rows() as f64;
        let mut loss: f64 = head_sums.iter().map(|s| s / n).sum();
        if self.config.weight_decay > 0.0 {
            loss += self.config.weight_decay * self.squared_params();
        }
        Ok(loss)
    }

    fn squared_params(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().map(|w| w * w).sum::<f64>()
                    + l.biases.iter().map(|b| b * b).sum::<f64>()
            })
            .sum()
    }

    /// One SGD step on the given batch of row indices.
    fn sgd_step(&mut self, d: &Dataset, batch: &[usize]) {
        let levels = self.config.quantile_levels;
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();

        for &i in batch {
            let acts = self.forward(d.row(i));
            let y = d.response()[i];
            let out = acts.last().unwrap();
            let mut delta: Vec<f64> = (0..3)
                .map(|h| pinball_grad(levels[h], y, out[h]))
                .collect();
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input: &[f64] = &acts[l];
                let grad = &mut grads[l];
                for o in 0..layer.fan_out {
                    grad.biases[o] += delta[o];
                    let row = &mut grad.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (g, xi) in row.iter_mut().zip(input.iter()) {
                        *g += delta[o] * xi;
                    }
                }
                if l > 0 {
                    let mut next = vec![0.0; layer.fan_in];
                    for (j, nd) in next.iter_mut().enumerate() {
                        if input[j] > 0.0 {
                            let mut s = 0.0;
                            for o in 0..layer.fan_out {
                                s += layer.weights[o * layer.fan_in + j] * delta[o];
                            }
                            *nd = s;
                        }
                    }
                    delta = next;
                }
            }
        }

        let lr = self.config.learning_rate;
        let wd = self.config.weight_decay;
        let scale = 1.0 / batch.len() as f64;
        for (layer, grad) in self.layers.iter_mut().zip(grads.iter()) {
            for (w, g) in layer.weights.iter_mut().zip(grad.weights.iter()) {
                *w -= lr * (g * scale + 2.0 * wd * *w);
            }
            for (b, g) in layer.biases.iter_mut().zip(grad.biases.iter()) {
                *b -= lr * (g * scale + 2.0 * wd * *b);
            }
        }
    }

    /// Copy of this model with all first-layer weights from feature `j`
    /// zeroed, so predictions provably ignore that column. Diagnostic tool
    /// for sensitivity and ablation checks.
    pub fn ablate_feature(&self, j: usize) -> Result<QuantileModel> {
        if j >= self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: j,
            });
        }
        let mut out = self.clone();
        let first = &mut out.layers[0];
        for o in 0..first.fan_out {
            first.weights[o * first.fan_in + j] = 0.0;
        }
        Ok(out)
    }

    /// Serializes parameters and config as versioned JSON; round-trips are
    /// bit-exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: self.input_dim,
            config: self.config.clone(),
            layers: self.layers.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<QuantileModel> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat {
                path: path.to_path_buf(),
                reason: format!(
                    "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
                    file.format_version
                ),
            });
        }
        let mut expected_in = file.input_dim;
        for layer in &file.layers {
            if layer.fan_in != expected_in || layer.weights.len() != layer.fan_in * layer.fan_out {
                return Err(Error::ModelFormat {
                    path: path.to_path_buf(),
                    reason: "inconsistent layer shapes".to_string(),
                });
            }
            expected_in = layer.fan_out;
        }
        if expected_in != 3 || file.layers.is_empty() {
            return Err(Error::ModelFormat {
                path: path.to_path_buf(),
                reason: "model must end in three output heads".to_string(),
            });
        }
        file.config.validate().map_err(|e| Error::ModelFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(QuantileModel {
            layers: file.layers,
            config: file.config,
            input_dim: file.input_dim,
        })
    }
}

/// Trains a three-head quantile net on `train_set`.
///
/// Deterministic given `cfg.seed`. The returned parameters are the
/// best-objective snapshot over epochs, so the final training loss never
/// exceeds the initial one. A non-finite loss aborts with an error (the
/// usual cause is a divergent learning rate).
pub fn train(train_set: &Dataset, cfg: &QuantileNetConfig) -> Result<QuantileModel> {
    cfg.validate()?;
    if train_set.n_rows() < cfg.batch_size {
        return Err(Error::TooFew {
            what: "training rows",
            needed: cfg.batch_size,
            got: train_set.n_rows(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = QuantileModel::init(train_set.n_features(), cfg.clone(), &mut rng);
    let mut best_layers = model.layers.clone();
    let mut best_loss = model.objective(train_set)?;

    let mut indices: Vec<usize> = (0..train_set.n_rows()).collect();
    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        for batch in indices.chunks(cfg.batch_size) {
            model.sgd_step(train_set, batch);
        }
        let loss = model.objective(train_set)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if loss < best_loss {
            best_loss = loss;
            best_layers = model.layers.clone();
        }
    }
    model.layers = best_layers;
    Ok(model)
}
