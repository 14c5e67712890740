//! Temperature-softmax region classifiers: the noisy variational circuit
//! with a linear head, and the classical MLP baseline with Gaussian logit noise.

mod mlp;
mod vqc;

pub use mlp::{calibrate_sigma, mlp_forward_noisy, train_mlp, Calibration, Dense, MlpBaseline, MlpConfig};
pub use vqc::{train_vqc, vqc_forward, VqcModel, VqcOutput};

use crate::mplp::{locate_region, MplpError, RegionAtlas};
use crate::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
    #[error(transparent)]
    Mplp(#[from] MplpError),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Data(String),
}

/// `p_k ∝ exp(beta s_k)`, evaluated after subtracting the largest logit.
pub fn softmax_probs(s: &[f64], beta: f64) -> Vec<f64> {
    let mx = s.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e: Vec<f64> = s.iter().map(|&v| (beta * (v - mx)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `log p_k` of [`softmax_probs`], computed without underflow.
pub fn log_softmax(s: &[f64], beta: f64) -> Vec<f64> {
    let mx = s.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = s.iter().map(|&v| (beta * (v - mx)).exp()).sum::<f64>().ln();
    s.iter().map(|&v| beta * (v - mx) - lse).collect()
}

/// Inverse-CDF categorical draw; returns a 1-based region id.
pub fn sample_region<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k + 1;
        }
    }
    // Rounding left the total just below one: take the last class with mass.
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1) + 1
}

/// 1-based id of the largest entry (first on ties).
pub fn argmax_id(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best + 1
}

/// `s_{k*} - max_{k != k*} s_k` for a 1-based true id.
pub fn margin(logits: &[f64], true_id: usize) -> f64 {
    let k = true_id - 1;
    let other = logits
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v));
    logits[k] - other
}

/// Logits `W h (+ b)` and inverse temperature for the output softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// `K x n_in`.
    pub weights: Matrix,
    /// `None` in bias-free mode.
    pub bias: Option<Vec<f64>>,
    pub beta: f64,
}

impl LinearHead {
    pub fn k(&self) -> usize {
        self.weights.rows()
    }

    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        let mut s = self.weights.mul_vec(h);
        if let Some(b) = &self.bias {
            for (si, bi) in s.iter_mut().zip(b) {
                *si += bi;
            }
        }
        s
    }

    /// `max_k ||w_k||_1`.
    pub fn max_row_l1(&self) -> f64 {
        (0..self.k())
            .map(|k| self.weights.row(k).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ClassifierError::Config(format!("beta = {} must be positive", self.beta)));
        }
        if !self.weights.is_finite() || self.bias.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ClassifierError::Config("head has non-finite entries".into()));
        }
        if self.bias.as_ref().is_some_and(|b| b.len() != self.k()) {
            return Err(ClassifierError::Config("bias length differs from class count".into()));
        }
        Ok(())
    }
}

/// Cross-entropy of `softmax(beta s)` against a 1-based label, and its
/// gradient with respect to the logits.
pub fn cross_entropy(s: &[f64], beta: f64, label: usize) -> (f64, Vec<f64>) {
    let p = softmax_probs(s, beta);
    let loss = -p[label - 1].max(1e-300).ln();
    let g = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| beta * (pk - if k + 1 == label { 1.0 } else { 0.0 }))
        .collect();
    (loss, g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Step-size schedule over the whole run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// `lr (1 + cos(pi t / T)) / 2` over the `T` optimizer steps.
    #[default]
    Cosine,
}

impl LrSchedule {
    /// Step size for step `t` (0-based) of `total`.
    pub fn rate(self, lr: f64, t: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => lr,
            LrSchedule::Cosine => 0.5 * lr * (1.0 + (std::f64::consts::PI * t as f64 / total.max(1) as f64).cos()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Inverse temperature of the softmax inside the training loss.
    pub train_beta: f64,
    #[serde(default)]
    pub schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            adam: AdamConfig::default(),
            train_beta: 3.0,
            schedule: LrSchedule::Cosine,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.batch_size == 0 {
            return Err(ClassifierError::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ClassifierError::Config("learning rate must be positive".into()));
        }
        if !(self.train_beta > 0.0) {
            return Err(ClassifierError::Config("training beta must be positive".into()));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(ClassifierError::Config("Adam hyperparameters out of range".into()));
        }
        Ok(())
    }
}

/// Adam state over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.cfg.eps);
        }
    }
}

/// Normalized parameter points with 1-based region labels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub thetas: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `count` uniform points in `[-1, 1]^m` labeled by point location.
    pub fn sample(atlas: &RegionAtlas, count: usize, seed: u64) -> Result<Self, ClassifierError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::default();
        for _ in 0..count {
            let theta: Vec<f64> = (0..atlas.m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let label = locate_region(atlas, &theta)?;
            ds.thetas.push(theta);
            ds.labels.push(label);
        }
        Ok(ds)
    }

    /// First `round(frac * len)` points and the rest (the sample is already random).
    pub fn split(&self, train_frac: f64) -> (Dataset, Dataset) {
        let cut = ((self.len() as f64) * train_frac).round() as usize;
        let cut = cut.min(self.len());
        (
            Dataset {
                thetas: self.thetas[..cut].to_vec(),
                labels: self.labels[..cut].to_vec(),
            },
            Dataset {
                thetas: self.thetas[cut..].to_vec(),
                labels: self.labels[cut..].to_vec(),
            },
        )
    }

    pub(crate) fn check(&self, k: usize, m: usize) -> Result<(), ClassifierError> {
        if self.thetas.len() != self.labels.len() {
            return Err(ClassifierError::Data("theta and label counts differ".into()));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(ClassifierError::Data(format!("label {l} outside 1..={k}")));
        }
        if self.thetas.iter().any(|t| t.len() != m) {
            return Err(ClassifierError::Data(format!("every theta must have {m} components")));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

/// Shuffled minibatch order for one epoch.
pub(crate) fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Optimizer steps in a run: one per minibatch per epoch.
pub(crate) fn total_steps(n: usize, tc: &TrainConfig) -> usize {
    tc.epochs * n.div_ceil(tc.batch_size)
}
