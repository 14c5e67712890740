use super::{argmax_id, cross_entropy, epoch_order, softmax_probs, total_steps, Adam, ClassifierError, Dataset, EpochLog, TrainConfig};
use crate::matrix::Matrix;
use crate::privacy::{audit_mlp, AdjacentPairs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fully connected layer `W a (+ b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`.
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl Dense {
    fn apply(&self, a: &[f64]) -> Vec<f64> {
        let mut z = self.weights.mul_vec(a);
        if let Some(b) = &self.bias {
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
        }
        z
    }

    fn n_params(&self) -> usize {
        self.weights.as_slice().len() + self.bias.as_ref().map_or(0, |b| b.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Widths of the tanh hidden layers (each with bias).
    pub hidden: Vec<usize>,
    /// Whether the final linear layer carries a bias.
    pub head_bias: bool,
}

impl Default for MlpConfig {
    /// Two tanh layers of width 7 and a bias-free head: for `m = 3` inputs and
    /// `K = 7` classes this is `3 -> 7 -> 7 -> 7` with 133 parameters.
    fn default() -> Self {
        Self {
            hidden: vec![7, 7],
            head_bias: false,
        }
    }
}

/// Tanh network producing `K` logits, sampled through `softmax(beta (s + noise))`
/// with i.i.d. `N(0, sigma^2)` logit noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpBaseline {
    pub layers: Vec<Dense>,
    pub beta: f64,
    pub sigma: f64,
}

impl MlpBaseline {
    /// Fan-in scaled uniform weights `U(-1, 1) / sqrt(fan_in)`, zero biases.
    pub fn init(m: usize, k: usize, cfg: &MlpConfig, seed: u64) -> Result<Self, ClassifierError> {
        if k < 2 || m == 0 || cfg.hidden.contains(&0) {
            return Err(ClassifierError::Config("MLP needs m >= 1, K >= 2 and positive widths".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![m];
        dims.extend(&cfg.hidden);
        dims.push(k);
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (fan_in, out) = (dims[l], dims[l + 1]);
                let s = 1.0 / (fan_in as f64).sqrt();
                let w = (0..out * fan_in).map(|_| rng.random_range(-1.0..1.0) * s).collect();
                let has_bias = l + 1 < n_layers || cfg.head_bias;
                Dense {
                    weights: Matrix::from_row_major(out, fan_in, w),
                    bias: has_bias.then(|| vec![0.0; out]),
                }
            })
            .collect();
        Ok(Self {
            layers,
            beta: 1.0,
            sigma: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.rows())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// Noise-free logits.
    pub fn logits(&self, theta: &[f64]) -> Vec<f64> {
        let mut a = theta.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.apply(&a);
            if l < last {
                a.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        a
    }

    /// Monte-Carlo mean of `softmax(beta (s + sigma z))` over `draws` noise
    /// vectors from `seed` (the same seed gives common random numbers across inputs).
    pub fn expected_probs(&self, theta: &[f64], sigma: f64, beta: f64, draws: usize, seed: u64) -> Vec<f64> {
        let s = self.logits(theta);
        if sigma == 0.0 || draws == 0 {
            return softmax_probs(&s, beta);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = vec![0.0; s.len()];
        let mut noisy = vec![0.0; s.len()];
        for _ in 0..draws {
            for (n, v) in noisy.iter_mut().zip(&s) {
                let z: f64 = rng.sample(StandardNormal);
                *n = v + sigma * z;
            }
            for (a, p) in acc.iter_mut().zip(softmax_probs(&noisy, beta)) {
                *a += p;
            }
        }
        acc.iter_mut().for_each(|a| *a /= draws as f64);
        acc
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend_from_slice(l.weights.as_slice());
            if let Some(b) = &l.bias {
                v.extend_from_slice(b);
            }
        }
        v
    }

    fn set_flat(&mut self, v: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.as_slice().len();
            l.weights.as_mut_slice().copy_from_slice(&v[off..off + nw]);
            off += nw;
            if let Some(b) = &mut l.bias {
                let nb = b.len();
                b.copy_from_slice(&v[off..off + nb]);
                off += nb;
            }
        }
    }

    /// Cross-entropy, backpropagated gradient (flat layout) and correctness.
    fn sample_gradient(&self, theta: &[f64], label: usize, train_beta: f64) -> (f64, Vec<f64>, bool) {
        let last = self.layers.len() - 1;
        let mut acts = vec![theta.to_vec()];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(acts.last().expect("input present"));
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        let s = acts.last().expect("output present").clone();
        let (loss, mut delta) = cross_entropy(&s, train_beta, label);
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let mut g = Vec::with_capacity(layer.n_params());
            for d in &delta {
                g.extend(input.iter().map(|a| d * a));
            }
            if layer.bias.is_some() {
                g.extend_from_slice(&delta);
            }
            grads[l] = g;
            if l > 0 {
                let back = layer.weights.tr_mul_vec(&delta);
                // derivative of tanh at the previous layer's output
                delta = back.iter().zip(input).map(|(b, a)| b * (1.0 - a * a)).collect();
            }
        }
        (loss, grads.concat(), argmax_id(&s) == label)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .thetas
            .iter()
            .zip(&data.labels)
            .filter(|(t, &l)| argmax_id(&self.logits(t)) == l)
            .count();
        hits as f64 / data.len() as f64
    }
}

/// One noisy release: `softmax(beta (s + N(0, sigma^2)))`.
pub fn mlp_forward_noisy<R: Rng + ?Sized>(mlp: &MlpBaseline, theta: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let mut s = mlp.logits(theta);
    if sigma > 0.0 {
        for v in &mut s {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    softmax_probs(&s, mlp.beta)
}

/// Adam with backpropagation on noise-free logits.
pub fn train_mlp(
    train: &Dataset,
    test: Option<&Dataset>,
    m: usize,
    k: usize,
    cfg: &MlpConfig,
    tc: &TrainConfig,
) -> Result<(MlpBaseline, Vec<EpochLog>), ClassifierError> {
    tc.validate()?;
    train.check(k, m)?;
    if let Some(t) = test {
        t.check(k, m)?;
    }
    let mut model = MlpBaseline::init(m, k, cfg, tc.seed)?;
    let mut flat = model.flat();
    let mut opt = Adam::new(flat.len(), tc.learning_rate, tc.adam.clone());
    let (mut step, total) = (0, total_steps(train.len(), tc));
    let mut rng = ChaCha8Rng::seed_from_u64(crate::provenance::derive_seed(tc.seed, 1));
    let mut log = Vec::with_capacity(tc.epochs);
    for epoch in 1..=tc.epochs {
        let order = epoch_order(train.len(), &mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(tc.batch_size).enumerate() {
            let per: Vec<(f64, Vec<f64>, bool)> = batch
                .par_iter()
                .map(|&i| model.sample_gradient(&train.thetas[i], train.labels[i], tc.train_beta))
                .collect();
            let mut grad = vec![0.0; flat.len()];
            let mut batch_loss = 0.0;
            for (l, g, ok) in &per {
                batch_loss += l;
                correct += *ok as usize;
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            if !batch_loss.is_finite() {
                return Err(ClassifierError::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss;
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            opt.set_learning_rate(tc.schedule.rate(tc.learning_rate, step, total));
            step += 1;
            opt.step(&mut flat, &grad);
            model.set_flat(&flat);
        }
        let entry = EpochLog {
            epoch,
            loss: loss_sum / train.len().max(1) as f64,
            train_accuracy: correct as f64 / train.len().max(1) as f64,
            test_accuracy: test.map(|t| model.accuracy(t)),
        };
        log::info!(
            "mlp epoch {epoch}: loss {:.4}, train acc {:.4}, test acc {:?}",
            entry.loss,
            entry.train_accuracy,
            entry.test_accuracy
        );
        log.push(entry);
    }
    Ok((model, log))
}

/// Result of matching the noisy MLP's empirical epsilon to a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma: f64,
    pub eps95: f64,
    pub target: f64,
    pub iterations: usize,
    pub note: Option<String>,
}

/// Finds `sigma` such that the audited 95th-percentile epsilon is within 5% of
/// `target_eps95` (bracketing by doubling, then log-space bisection).
pub fn calibrate_sigma(
    mlp: &MlpBaseline,
    target_eps95: f64,
    pairs: &AdjacentPairs,
    draws: usize,
    seed: u64,
) -> Result<Calibration, ClassifierError> {
    if !(target_eps95 > 0.0) {
        return Err(ClassifierError::Config("target epsilon must be positive".into()));
    }
    let eps_at = |sigma: f64| audit_mlp(mlp, sigma, pairs, draws, seed).eps95;
    let within = |e: f64| (e - target_eps95).abs() <= 0.05 * target_eps95;
    let base = eps_at(0.0);
    if base <= target_eps95 * 1.05 {
        return Ok(Calibration {
            sigma: 0.0,
            eps95: base,
            target: target_eps95,
            iterations: 0,
            note: (base < target_eps95 * 0.95)
                .then(|| format!("target exceeds the noise-free epsilon {base:.4}; sigma = 0")),
        });
    }
    let mut iterations = 0;
    let (mut lo, mut hi) = (0.0_f64, 0.05_f64);
    let mut e_hi = eps_at(hi);
    while e_hi > target_eps95 {
        if within(e_hi) {
            return Ok(Calibration {
                sigma: hi,
                eps95: e_hi,
                target: target_eps95,
                iterations,
                note: None,
            });
        }
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if hi > 1e6 {
            return Err(ClassifierError::Config(format!(
                "no noise level up to 1e6 reaches epsilon {target_eps95}"
            )));
        }
        e_hi = eps_at(hi);
    }
    let mut best = (hi, e_hi);
    for _ in 0..80 {
        if within(best.1) {
            break;
        }
        iterations += 1;
        let mid = if lo == 0.0 { 0.5 * hi } else { (lo * hi).sqrt() };
        let e = eps_at(mid);
        if (e - target_eps95).abs() < (best.1 - target_eps95).abs() {
            best = (mid, e);
        }
        if e > target_eps95 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        sigma: best.0,
        eps95: best.1,
        target: target_eps95,
        iterations,
        note: (!within(best.1)).then(|| "bisection stopped before reaching the 5% band".to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_for_seven_classes() {
        let m = MlpBaseline::init(3, 7, &MlpConfig::default(), 0).unwrap();
        assert_eq!(m.n_params(), 133);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut m = MlpBaseline::init(3, 4, &MlpConfig::default(), 5).unwrap();
        let theta = [0.2, -0.7, 0.4];
        let (_, g, _) = m.sample_gradient(&theta, 3, 1.3);
        let base = m.flat();
        for i in (0..base.len()).step_by(7) {
            let mut p = base.clone();
            p[i] += 1e-6;
            m.set_flat(&p);
            let lp = m.sample_gradient(&theta, 3, 1.3).0;
            p[i] -= 2e-6;
            m.set_flat(&p);
            let lm = m.sample_gradient(&theta, 3, 1.3).0;
            m.set_flat(&base);
            assert!(((lp - lm) / 2e-6 - g[i]).abs() < 1e-6, "param {i}");
        }
    }

    #[test]
    fn noise_free_forward_is_deterministic() {
        let m = MlpBaseline::init(3, 4, &MlpConfig::default(), 5).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        assert_eq!(mlp_forward_noisy(&m, &[0.1, 0.2, 0.3], 0.0, &mut r1), mlp_forward_noisy(&m, &[0.1, 0.2, 0.3], 0.0, &mut r2));
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(mlp_forward_noisy(&m, &[0.1, 0.2, 0.3], 0.5, &mut r1), mlp_forward_noisy(&m, &[0.1, 0.2, 0.3], 0.5, &mut r2));
    }

    #[test]
    fn huge_noise_is_near_uniform_on_average() {
        let m = MlpBaseline::init(3, 4, &MlpConfig::default(), 5).unwrap();
        let p = m.expected_probs(&[0.1, 0.2, 0.3], 1e3, 1.0, 20_000, 1);
        for v in p {
            assert!((v - 0.25).abs() < 0.02);
        }
    }
}
