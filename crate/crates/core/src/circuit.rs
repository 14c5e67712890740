//! Statevector simulation of the data-reuploading circuit, depolarized
//! Pauli-Z features, and parameter-shift gradients.
//!
//! Qubit 0 is the most significant bit of the amplitude index.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Default radians per normalized parameter unit in the encoding rotations.
/// A full `pi` turn per unit makes the six-fold re-uploaded features too
/// oscillatory to train in 30 epochs; half a radian keeps each component's
/// total rotation within one period.
pub const ENCODING_SCALE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("invalid circuit configuration: {0}")]
    Config(String),
    #[error("theta has {found} components, the encoding pattern needs {expected}")]
    ThetaDimension { found: usize, expected: usize },
    #[error("noise level gamma = {0} is outside [0, 1]")]
    Gamma(f64),
    #[error("parameter shape mismatch: {0}")]
    Params(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub n_q: usize,
    pub layers: usize,
    /// Parameter component encoded on each qubit.
    pub encoding_pattern: Vec<usize>,
    /// Dimension of the parameter vector.
    pub m: usize,
    /// Radians per normalized parameter unit.
    pub scale: f64,
}

impl CircuitConfig {
    /// Cyclic tiling of `m` parameter components over `n_q` qubits.
    pub fn new(n_q: usize, layers: usize, m: usize) -> Result<Self, CircuitError> {
        if m == 0 {
            return Err(CircuitError::Config("parameter dimension must be at least 1".into()));
        }
        Self::with_pattern(n_q, layers, m, (0..n_q).map(|i| i % m).collect())
    }

    pub fn with_pattern(n_q: usize, layers: usize, m: usize, pattern: Vec<usize>) -> Result<Self, CircuitError> {
        let cfg = Self {
            n_q,
            layers,
            encoding_pattern: pattern,
            m,
            scale: ENCODING_SCALE,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.n_q == 0 || self.n_q > 20 {
            return Err(CircuitError::Config(format!("n_q = {} must be in 1..=20", self.n_q)));
        }
        if self.layers == 0 {
            return Err(CircuitError::Config("at least one layer is required".into()));
        }
        if self.encoding_pattern.len() != self.n_q {
            return Err(CircuitError::Config(format!(
                "encoding pattern has {} entries for {} qubits",
                self.encoding_pattern.len(),
                self.n_q
            )));
        }
        if let Some(&bad) = self.encoding_pattern.iter().find(|&&j| j >= self.m) {
            return Err(CircuitError::Config(format!(
                "encoding pattern refers to component {bad}, but m = {}",
                self.m
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CircuitError::Config("encoding scale must be positive".into()));
        }
        Ok(())
    }

    /// How many qubits encode each parameter component in one layer.
    pub fn encoding_multiplicity(&self) -> Vec<usize> {
        let mut c = vec![0; self.m];
        for &j in &self.encoding_pattern {
            c[j] += 1;
        }
        c
    }

    pub fn n_params(&self) -> usize {
        self.n_q * self.layers
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    n_q: usize,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_q: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_q];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { amps, n_q }
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_q: usize, index: usize) -> Self {
        let mut s = Self::zero(n_q);
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[index] = Complex64::new(1.0, 0.0);
        s
    }

    /// Wraps amplitudes; the length must be a power of two and the norm one.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, CircuitError> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(CircuitError::Config(format!("{len} amplitudes is not a power of two")));
        }
        let s = Self {
            n_q: len.trailing_zeros() as usize,
            amps,
        };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(CircuitError::Config(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }

    /// Haar-like random state (normalized complex Gaussian amplitudes).
    pub fn random<R: Rng + ?Sized>(n_q: usize, rng: &mut R) -> Self {
        let normal = rand_distr::StandardNormal;
        let mut amps: Vec<Complex64> = (0..1usize << n_q)
            .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
            .collect();
        let nrm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= nrm;
        }
        Self { amps, n_q }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_q
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_q - 1 - qubit)
    }

    /// `Ry(angle) = [[cos a/2, -sin a/2], [sin a/2, cos a/2]]` on `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) {
        assert!(qubit < self.n_q, "qubit {qubit} out of range");
        let (s, c) = (0.5 * angle).sin_cos();
        let mask = self.mask(qubit);
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = a0 * c - a1 * s;
                self.amps[j] = a0 * s + a1 * c;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        assert!(control < self.n_q && target < self.n_q && control != target);
        let (cm, tm) = (self.mask(control), self.mask(target));
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    /// `CNOT(i, i+1)` for `i = 0 .. n_q-2`, in order. A single qubit has no
    /// ladder; the call is then a no-op.
    pub fn apply_cnot_ladder(&mut self) {
        if self.n_q < 2 {
            log::warn!("CNOT ladder on a single qubit is a no-op");
            return;
        }
        for i in 0..self.n_q - 1 {
            self.apply_cnot(i, i + 1);
        }
    }

    /// `<Z_j>` for every qubit.
    pub fn z_expectations(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_q];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (j, zj) in z.iter_mut().enumerate() {
                if i & self.mask(j) == 0 {
                    *zj += p;
                } else {
                    *zj -= p;
                }
            }
        }
        z
    }
}

/// Trainable angles, one per qubit per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqcParams {
    /// `phi[layer][qubit]` in radians.
    pub phi: Vec<Vec<f64>>,
}

impl VqcParams {
    pub fn zeros(cfg: &CircuitConfig) -> Self {
        Self {
            phi: vec![vec![0.0; cfg.n_q]; cfg.layers],
        }
    }

    pub fn from_flat(cfg: &CircuitConfig, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), cfg.n_params());
        Self {
            phi: flat.chunks(cfg.n_q).map(|c| c.to_vec()).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.phi.iter().flatten().copied().collect()
    }

    pub fn check(&self, cfg: &CircuitConfig) -> Result<(), CircuitError> {
        if self.phi.len() != cfg.layers || self.phi.iter().any(|l| l.len() != cfg.n_q) {
            return Err(CircuitError::Params(format!(
                "expected {} layers of {} angles",
                cfg.layers, cfg.n_q
            )));
        }
        if self.phi.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CircuitError::Params("non-finite angle".into()));
        }
        Ok(())
    }
}

/// `L` layers of encoding `Ry(scale * theta)`, trainable `Ry(phi)` and a CNOT
/// ladder, applied to `|0...0>`.
pub fn run_circuit(cfg: &CircuitConfig, params: &VqcParams, theta: &[f64]) -> Result<StateVector, CircuitError> {
    if theta.len() != cfg.m {
        return Err(CircuitError::ThetaDimension {
            found: theta.len(),
            expected: cfg.m,
        });
    }
    params.check(cfg)?;
    let mut state = StateVector::zero(cfg.n_q);
    for layer in &params.phi {
        for (q, &j) in cfg.encoding_pattern.iter().enumerate() {
            state.apply_ry(q, cfg.scale * theta[j]);
        }
        for (q, &a) in layer.iter().enumerate() {
            state.apply_ry(q, a);
        }
        if cfg.n_q > 1 {
            state.apply_cnot_ladder();
        }
    }
    Ok(state)
}

fn check_gamma(gamma: f64) -> Result<(), CircuitError> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(CircuitError::Gamma(gamma))
    }
}

/// Pauli-Z features of the globally depolarized output, `(1 - gamma) <Z_j>`
/// (the maximally mixed part has zero Z expectation).
pub fn features(state: &StateVector, gamma: f64) -> Result<Vec<f64>, CircuitError> {
    check_gamma(gamma)?;
    Ok(state.z_expectations().into_iter().map(|z| (1.0 - gamma) * z).collect())
}

/// Finite-shot estimate of [`features`]: each qubit's outcome count is a
/// binomial draw around its depolarized `P(0)`.
pub fn features_shots<R: Rng + ?Sized>(
    state: &StateVector,
    gamma: f64,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<f64>, CircuitError> {
    let exact = features(state, gamma)?;
    if shots == 0 {
        return Err(CircuitError::Config("shot count must be positive".into()));
    }
    Ok(exact
        .into_iter()
        .map(|h| {
            let p0 = (0.5 * (1.0 + h)).clamp(0.0, 1.0);
            let k = Binomial::new(shots, p0).expect("valid binomial").sample(rng);
            2.0 * k as f64 / shots as f64 - 1.0
        })
        .collect())
}

/// Trace distance between pure states, `sqrt(1 - |<a|b>|^2)`.
pub fn trace_distance(a: &StateVector, b: &StateVector) -> f64 {
    (1.0 - a.inner(b).norm_sqr()).max(0.0).sqrt()
}

/// Features and their Jacobian with respect to every angle (row-major,
/// `n_params x n_q`), each row from a pair of `+-pi/2` shifted circuits.
pub fn feature_jacobian(
    cfg: &CircuitConfig,
    params: &VqcParams,
    theta: &[f64],
    gamma: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), CircuitError> {
    let h = features(&run_circuit(cfg, params, theta)?, gamma)?;
    let mut flat = params.flat();
    let mut jac = Vec::with_capacity(flat.len());
    for p in 0..flat.len() {
        let orig = flat[p];
        flat[p] = orig + FRAC_PI_2;
        let hp = features(&run_circuit(cfg, &VqcParams::from_flat(cfg, &flat), theta)?, gamma)?;
        flat[p] = orig - FRAC_PI_2;
        let hm = features(&run_circuit(cfg, &VqcParams::from_flat(cfg, &flat), theta)?, gamma)?;
        flat[p] = orig;
        jac.push(hp.iter().zip(&hm).map(|(a, b)| 0.5 * (a - b)).collect());
    }
    Ok((h, jac))
}

/// A scalar loss of the feature vector with its gradient.
pub trait FeatureLoss {
    fn value_and_grad(&self, h: &[f64]) -> (f64, Vec<f64>);
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> FeatureLoss for F {
    fn value_and_grad(&self, h: &[f64]) -> (f64, Vec<f64>) {
        self(h)
    }
}

/// Gradient of `loss(features)` over the flattened angles. Each feature
/// derivative is the exact shift-rule difference `(h(phi + pi/2) - h(phi - pi/2)) / 2`;
/// the loss enters through the chain rule, so the result is exact for any
/// differentiable loss (and coincides with shifting the loss itself when
/// the loss is linear in the features).
pub fn param_shift_grad(
    cfg: &CircuitConfig,
    params: &VqcParams,
    theta: &[f64],
    gamma: f64,
    loss: &dyn FeatureLoss,
) -> Result<Vec<f64>, CircuitError> {
    let (h, jac) = feature_jacobian(cfg, params, theta, gamma)?;
    let (_, g) = loss.value_and_grad(&h);
    Ok(jac.iter().map(|row| crate::matrix::dot(row, &g)).collect())
}

/// The shift rule applied to the loss itself, `(L(phi + pi/2) - L(phi - pi/2)) / 2`
/// per angle. Exact when the loss is affine in the features.
pub fn param_shift_grad_direct(
    cfg: &CircuitConfig,
    params: &VqcParams,
    theta: &[f64],
    gamma: f64,
    loss: &dyn Fn(&[f64]) -> f64,
) -> Result<Vec<f64>, CircuitError> {
    let mut flat = params.flat();
    let mut out = Vec::with_capacity(flat.len());
    for p in 0..flat.len() {
        let orig = flat[p];
        flat[p] = orig + FRAC_PI_2;
        let lp = loss(&features(&run_circuit(cfg, &VqcParams::from_flat(cfg, &flat), theta)?, gamma)?);
        flat[p] = orig - FRAC_PI_2;
        let lm = loss(&features(&run_circuit(cfg, &VqcParams::from_flat(cfg, &flat), theta)?, gamma)?);
        flat[p] = orig;
        out.push(0.5 * (lp - lm));
    }
    Ok(out)
}
