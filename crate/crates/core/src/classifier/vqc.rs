use super::{argmax_id, cross_entropy, epoch_order, softmax_probs, total_steps, Adam, ClassifierError, Dataset, EpochLog, LinearHead, TrainConfig};
use crate::circuit::{feature_jacobian, features, run_circuit, CircuitConfig, VqcParams};
use crate::matrix::{dot, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Variational circuit plus linear head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub circuit: CircuitConfig,
    pub params: VqcParams,
    pub head: LinearHead,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VqcOutput {
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Circuit → depolarized features → logits → `softmax(head.beta * s)`.
pub fn vqc_forward(
    cfg: &CircuitConfig,
    params: &VqcParams,
    head: &LinearHead,
    theta: &[f64],
    gamma: f64,
) -> Result<VqcOutput, ClassifierError> {
    let h = features(&run_circuit(cfg, params, theta)?, gamma)?;
    let s = head.logits(&h);
    let p = softmax_probs(&s, head.beta);
    Ok(VqcOutput {
        features: h,
        logits: s,
        probs: p,
    })
}

impl VqcModel {
    /// Angles uniform in `(-pi, pi)`, head weights uniform in `(-1, 1) / sqrt(n_q)`.
    pub fn init(circuit: CircuitConfig, k: usize, with_bias: bool, seed: u64) -> Result<Self, ClassifierError> {
        circuit.validate()?;
        if k < 2 {
            return Err(ClassifierError::Config("at least two classes are required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = (0..circuit.layers)
            .map(|_| (0..circuit.n_q).map(|_| rng.random_range(-PI..PI)).collect())
            .collect();
        let scale = 1.0 / (circuit.n_q as f64).sqrt();
        let w: Vec<f64> = (0..k * circuit.n_q).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let head = LinearHead {
            weights: Matrix::from_row_major(k, circuit.n_q, w),
            bias: with_bias.then(|| vec![0.0; k]),
            beta: 1.0,
        };
        Ok(Self {
            params: VqcParams { phi },
            circuit,
            head,
        })
    }

    pub fn k(&self) -> usize {
        self.head.k()
    }

    pub fn forward(&self, theta: &[f64], gamma: f64) -> Result<VqcOutput, ClassifierError> {
        vqc_forward(&self.circuit, &self.params, &self.head, theta, gamma)
    }

    pub fn logits(&self, theta: &[f64], gamma: f64) -> Result<Vec<f64>, ClassifierError> {
        Ok(self.forward(theta, gamma)?.logits)
    }

    /// Output distribution at an explicit inverse temperature.
    pub fn probs(&self, theta: &[f64], gamma: f64, beta: f64) -> Result<Vec<f64>, ClassifierError> {
        Ok(softmax_probs(&self.logits(theta, gamma)?, beta))
    }

    /// Trainable parameter count: circuit angles plus head entries.
    pub fn n_params(&self) -> usize {
        self.circuit.n_params() + self.head.weights.as_slice().len() + self.head.bias.as_ref().map_or(0, |b| b.len())
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = self.params.flat();
        v.extend_from_slice(self.head.weights.as_slice());
        if let Some(b) = &self.head.bias {
            v.extend_from_slice(b);
        }
        v
    }

    fn set_flat(&mut self, v: &[f64]) {
        let np = self.circuit.n_params();
        let nw = self.head.weights.as_slice().len();
        self.params = VqcParams::from_flat(&self.circuit, &v[..np]);
        self.head.weights.as_mut_slice().copy_from_slice(&v[np..np + nw]);
        if let Some(b) = &mut self.head.bias {
            b.copy_from_slice(&v[np + nw..]);
        }
    }

    /// Noise-free loss, gradient over all trainable parameters, and whether
    /// the sample is classified correctly.
    fn sample_gradient(&self, theta: &[f64], label: usize, train_beta: f64) -> Result<(f64, Vec<f64>, bool), ClassifierError> {
        let (h, jac) = feature_jacobian(&self.circuit, &self.params, theta, 0.0)?;
        let s = self.head.logits(&h);
        let (loss, ds) = cross_entropy(&s, train_beta, label);
        let k = self.k();
        let nq = self.circuit.n_q;
        // dL/dh = W^T dL/ds
        let dh = self.head.weights.tr_mul_vec(&ds);
        let mut g: Vec<f64> = jac.iter().map(|row| dot(row, &dh)).collect();
        for kk in 0..k {
            for j in 0..nq {
                g.push(ds[kk] * h[j]);
            }
        }
        if self.head.bias.is_some() {
            g.extend_from_slice(&ds);
        }
        Ok((loss, g, argmax_id(&s) == label))
    }

    /// Fraction of points whose noise-free argmax matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64, ClassifierError> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let hits: Vec<bool> = data
            .thetas
            .par_iter()
            .zip(&data.labels)
            .map(|(t, &l)| Ok(argmax_id(&self.logits(t, 0.0)?) == l))
            .collect::<Result<_, ClassifierError>>()?;
        Ok(hits.iter().filter(|&&b| b).count() as f64 / data.len() as f64)
    }
}

/// Joint Adam training of angles (shift-rule feature derivatives) and head
/// (analytic gradients) on noise-free features. Per-sample gradients are
/// computed in parallel and summed in sample order.
pub fn train_vqc(
    train: &Dataset,
    test: Option<&Dataset>,
    circuit: CircuitConfig,
    k: usize,
    with_bias: bool,
    tc: &TrainConfig,
) -> Result<(VqcModel, Vec<EpochLog>), ClassifierError> {
    tc.validate()?;
    train.check(k, circuit.m)?;
    if let Some(t) = test {
        t.check(k, circuit.m)?;
    }
    let mut model = VqcModel::init(circuit, k, with_bias, tc.seed)?;
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
                .collect::<Result<_, _>>()?;
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
        let test_accuracy = test.map(|t| model.accuracy(t)).transpose()?;
        let entry = EpochLog {
            epoch,
            loss: loss_sum / train.len().max(1) as f64,
            train_accuracy: correct as f64 / train.len().max(1) as f64,
            test_accuracy,
        };
        log::info!(
            "vqc epoch {epoch}: loss {:.4}, train acc {:.4}, test acc {:?}",
            entry.loss,
            entry.train_accuracy,
            entry.test_accuracy
        );
        log.push(entry);
    }
    Ok((model, log))
}
