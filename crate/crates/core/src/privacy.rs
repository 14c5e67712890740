//! Differential-privacy accounting for randomized region release: empirical
//! log-ratio audits over adjacent parameter pairs, the analytic bound for the
//! depolarized circuit, and the privacy–cost tradeoff bound.

use crate::circuit::{features, run_circuit, CircuitConfig, StateVector};
use crate::classifier::{log_softmax, margin, softmax_probs, ClassifierError, MlpBaseline, VqcModel};
use crate::grid::ParametricLp;
use crate::lp::{project_feasible, LpError};
use crate::mplp::{locate_region, MplpError, RegionAtlas};
use crate::provenance::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are floored here before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;
/// Row violation above which a reconstructed dispatch is infeasible.
pub const VIOLATION_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("invalid audit setting: {0}")]
    Config(String),
    #[error("gamma = 1 leaves no signal; the required beta is unbounded")]
    UnboundedBeta,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Mplp(#[from] MplpError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// How adjacent pairs are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencySpec {
    /// L2 distance between the two points of a pair (normalized units).
    pub delta_theta: f64,
    pub pair_count: usize,
    pub seed: u64,
}

/// Pairs `(theta, theta + delta_theta u)` with `u` a uniform unit vector and
/// both points inside `[-1, 1]^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacentPairs {
    pub delta_theta: f64,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdjacentPairs {
    /// Draws pairs at exactly `delta_theta`; a pair whose second point leaves
    /// the box is redrawn.
    pub fn generate(spec: &AdjacencySpec, m: usize) -> Result<Self, PrivacyError> {
        if !(spec.delta_theta > 0.0 && spec.delta_theta < 2.0) {
            return Err(PrivacyError::Config(format!(
                "delta_theta = {} must lie in (0, 2)",
                spec.delta_theta
            )));
        }
        if spec.pair_count == 0 || m == 0 {
            return Err(PrivacyError::Config("pair count and dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut pairs = Vec::with_capacity(spec.pair_count);
        while pairs.len() < spec.pair_count {
            let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let u: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let nrm = crate::matrix::norm2(&u);
            if nrm < 1e-12 {
                continue;
            }
            let prime: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| t + spec.delta_theta * v / nrm).collect();
            if prime.iter().all(|v| (-1.0..=1.0).contains(v)) {
                pairs.push((theta, prime));
            }
        }
        Ok(Self {
            delta_theta: spec.delta_theta,
            pairs,
        })
    }
}

/// `max_k |log(p_k / p'_k)|` and the maximizing class (0-based). A class with
/// mass on one side only yields `+inf`.
pub fn empirical_epsilon_with_class(p: &[f64], p_prime: &[f64]) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (k, (&a, &b)) in p.iter().zip(p_prime).enumerate() {
        let (fa, fb) = (a.max(PROB_FLOOR), b.max(PROB_FLOOR));
        let e = if (a < PROB_FLOOR) != (b < PROB_FLOOR) {
            f64::INFINITY
        } else {
            (fa.ln() - fb.ln()).abs()
        };
        if e > best.0 {
            best = (e, k);
        }
    }
    best
}

/// `max_k |log p_k - log p'_k|` from log-probabilities, and the maximizing
/// class. Exact-logit audits use this form so that no ratio saturates.
pub fn log_ratio_epsilon(log_p: &[f64], log_p_prime: &[f64]) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (k, (&a, &b)) in log_p.iter().zip(log_p_prime).enumerate() {
        let e = (a - b).abs();
        if e > best.0 {
            best = (e, k);
        }
    }
    best
}

pub fn empirical_epsilon(p: &[f64], p_prime: &[f64]) -> f64 {
    empirical_epsilon_with_class(p, p_prime).0
}

/// Linear-interpolation quantile over the finite samples (`+inf` excluded);
/// `None` when no finite sample exists.
pub fn epsilon_percentile(samples: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// Telescoped trace-distance Lipschitz constant of the encoding:
/// `L * (scale / 2) * ||c||_2`, where `c_j` counts the qubits encoding
/// component `j` in one layer.
pub fn encoding_lipschitz(cfg: &CircuitConfig) -> f64 {
    let c = cfg.encoding_multiplicity();
    let nrm = c.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
    cfg.layers as f64 * 0.5 * cfg.scale * nrm
}

/// Largest observed `D(psi(theta), psi(theta')) / ||theta - theta'||_2` over
/// random pairs (a lower estimate of the true constant, not a bound).
pub fn lipschitz_estimate(model: &VqcModel, pairs: &AdjacentPairs) -> Result<f64, PrivacyError> {
    let ratios: Vec<f64> = pairs
        .pairs
        .par_iter()
        .map(|(a, b)| {
            let sa = run_circuit(&model.circuit, &model.params, a).map_err(ClassifierError::from)?;
            let sb = run_circuit(&model.circuit, &model.params, b).map_err(ClassifierError::from)?;
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            Ok(crate::circuit::trace_distance(&sa, &sb) / d)
        })
        .collect::<Result<_, PrivacyError>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// `4 beta (1 - gamma) L_enc delta_theta max_k ||w_k||_1`.
pub fn theoretical_epsilon(beta: f64, gamma: f64, l_enc: f64, delta_theta: f64, w_norm: f64) -> f64 {
    4.0 * beta * (1.0 - gamma) * l_enc * delta_theta * w_norm
}

/// Inverse temperature that meets `eps_target` when the noise is assumed to be `gamma_assumed`.
pub fn required_beta(eps_target: f64, gamma_assumed: f64, l_enc: f64, delta_theta: f64, w_norm: f64) -> Result<f64, PrivacyError> {
    if gamma_assumed >= 1.0 {
        return Err(PrivacyError::UnboundedBeta);
    }
    let denom = 4.0 * (1.0 - gamma_assumed) * l_enc * delta_theta * w_norm;
    if !(denom > 0.0) {
        return Err(PrivacyError::Config("the bound's scale factor must be positive".into()));
    }
    Ok(eps_target / denom)
}

/// Privacy budget left unused by a noise-unaware choice of beta: `eps_target * gamma`.
pub fn wasted_budget(eps_target: f64, gamma_actual: f64) -> f64 {
    eps_target * gamma_actual
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let o: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        o.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let o: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(o.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }

    pub mod scalar {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            if v.is_finite() {
                s.serialize_f64(*v)
            } else {
                s.serialize_none()
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub model: String,
    pub gamma: f64,
    pub beta: f64,
    pub sigma: Option<f64>,
    pub delta_theta: f64,
    /// Per-pair empirical epsilon; `null` marks a saturated (infinite) ratio.
    #[serde(with = "finite_or_null")]
    pub eps_emp: Vec<f64>,
    /// `null` when no finite sample exists.
    #[serde(with = "finite_or_null::scalar")]
    pub eps95: f64,
    #[serde(with = "finite_or_null::scalar")]
    pub eps_max: f64,
    pub saturated: usize,
    pub eps_reg: Option<f64>,
    pub l_enc: Option<f64>,
    pub worst_pair: usize,
    pub worst_class: usize,
    /// Every finite and saturated sample is at most `eps_reg` (VQC only).
    pub bound_satisfied: Option<bool>,
}

fn summarize(
    model: &str,
    gamma: f64,
    beta: f64,
    sigma: Option<f64>,
    delta_theta: f64,
    per: Vec<(f64, usize)>,
    eps_reg: Option<f64>,
    l_enc: Option<f64>,
) -> PrivacyReport {
    let eps: Vec<f64> = per.iter().map(|e| e.0).collect();
    let (mut worst_pair, mut worst_class, mut eps_max) = (0, 0, 0.0);
    for (i, &(e, k)) in per.iter().enumerate() {
        if e > eps_max {
            (worst_pair, worst_class, eps_max) = (i, k + 1, e);
        }
    }
    if eps_max == 0.0 {
        worst_class = per.first().map_or(0, |p| p.1 + 1);
    }
    PrivacyReport {
        model: model.to_string(),
        gamma,
        beta,
        sigma,
        delta_theta,
        eps95: epsilon_percentile(&eps, 0.95).unwrap_or(f64::INFINITY),
        saturated: eps.iter().filter(|e| !e.is_finite()).count(),
        bound_satisfied: eps_reg.map(|r| eps.iter().all(|&e| e <= r * (1.0 + 1e-12) + 1e-15)),
        eps_emp: eps,
        eps_max,
        eps_reg,
        l_enc,
        worst_pair,
        worst_class,
    }
}

/// Exact-probability audit of the depolarized circuit at `(gamma, beta)`;
/// log-probabilities are compared directly, so no ratio saturates.
pub fn audit_vqc(model: &VqcModel, gamma: f64, beta: f64, pairs: &AdjacentPairs) -> Result<PrivacyReport, PrivacyError> {
    let states = circuit_states(model, pairs)?;
    audit_vqc_states(model, gamma, beta, pairs.delta_theta, &states)
}

/// Output states for every pair, reusable across noise and temperature settings.
pub fn circuit_states(model: &VqcModel, pairs: &AdjacentPairs) -> Result<Vec<(StateVector, StateVector)>, PrivacyError> {
    pairs
        .pairs
        .par_iter()
        .map(|(a, b)| {
            let sa = run_circuit(&model.circuit, &model.params, a).map_err(ClassifierError::from)?;
            let sb = run_circuit(&model.circuit, &model.params, b).map_err(ClassifierError::from)?;
            Ok((sa, sb))
        })
        .collect()
}

/// Audit from precomputed output states (see [`circuit_states`]).
pub fn audit_vqc_states(
    model: &VqcModel,
    gamma: f64,
    beta: f64,
    delta_theta: f64,
    states: &[(StateVector, StateVector)],
) -> Result<PrivacyReport, PrivacyError> {
    if !(beta > 0.0) {
        return Err(PrivacyError::Config(format!("beta = {beta} must be positive")));
    }
    let per: Vec<(f64, usize)> = states
        .par_iter()
        .map(|(sa, sb)| {
            let ha = features(sa, gamma).map_err(ClassifierError::from)?;
            let hb = features(sb, gamma).map_err(ClassifierError::from)?;
            let la = log_softmax(&model.head.logits(&ha), beta);
            let lb = log_softmax(&model.head.logits(&hb), beta);
            Ok(log_ratio_epsilon(&la, &lb))
        })
        .collect::<Result<_, PrivacyError>>()?;
    let l_enc = encoding_lipschitz(&model.circuit);
    let eps_reg = theoretical_epsilon(beta, gamma, l_enc, delta_theta, model.head.max_row_l1());
    Ok(summarize("vqc", gamma, beta, None, delta_theta, per, Some(eps_reg), Some(l_enc)))
}

/// Audit of the noisy MLP. Output distributions are Monte-Carlo means over
/// `draws` logit-noise vectors; both points of pair `i` share the noise stream
/// derived from `(seed, i)`.
pub fn audit_mlp(mlp: &MlpBaseline, sigma: f64, pairs: &AdjacentPairs, draws: usize, seed: u64) -> PrivacyReport {
    let per: Vec<(f64, usize)> = pairs
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let s = derive_seed(seed, i as u64);
            let pa = mlp.expected_probs(a, sigma, mlp.beta, draws, s);
            let pb = mlp.expected_probs(b, sigma, mlp.beta, draws, s);
            empirical_epsilon_with_class(&pa, &pb)
        })
        .collect();
    summarize("mlp", 0.0, mlp.beta, Some(sigma), pairs.delta_theta, per, None, None)
}

/// Inverse temperature at which the circuit's audited 95th-percentile epsilon
/// matches a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub beta: f64,
    pub eps95: f64,
    pub target: f64,
    pub iterations: usize,
}

/// Log-space bisection on `beta` at fixed `gamma` until the audited
/// 95th-percentile epsilon is within 0.5% of `target_eps95`.
pub fn calibrate_beta(
    model: &VqcModel,
    gamma: f64,
    target_eps95: f64,
    delta_theta: f64,
    states: &[(StateVector, StateVector)],
) -> Result<BetaCalibration, PrivacyError> {
    if !(target_eps95 > 0.0 && target_eps95.is_finite()) {
        return Err(PrivacyError::Config("target epsilon must be positive".into()));
    }
    let eps_at = |beta: f64| -> Result<f64, PrivacyError> { Ok(audit_vqc_states(model, gamma, beta, delta_theta, states)?.eps95) };
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let mut iterations = 0;
    while eps_at(lo)? > target_eps95 {
        lo *= 0.5;
        iterations += 1;
        if lo < 1e-12 {
            return Err(PrivacyError::Config(format!("no beta reaches epsilon {target_eps95}")));
        }
    }
    while eps_at(hi)? < target_eps95 {
        hi *= 2.0;
        iterations += 1;
        if hi > 1e12 {
            return Err(PrivacyError::Config(format!("epsilon {target_eps95} is out of reach (gamma = {gamma})")));
        }
    }
    let mut best = (hi, eps_at(hi)?);
    for _ in 0..100 {
        if (best.1 - target_eps95).abs() <= 0.005 * target_eps95 {
            break;
        }
        iterations += 1;
        let mid = (lo * hi).sqrt();
        let e = eps_at(mid)?;
        if (e - target_eps95).abs() < (best.1 - target_eps95).abs() {
            best = (mid, e);
        }
        if e > target_eps95 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BetaCalibration {
        beta: best.0,
        eps95: best.1,
        target: target_eps95,
        iterations,
    })
}

/// Evaluated cost of releasing region `k` at `theta`: the reconstructed
/// dispatch, projected onto the feasible set when it violates a row by more
/// than [`VIOLATION_THRESHOLD`]. Returns `(cost, infeasible, dispatch)`.
pub fn evaluate_region_choice(
    atlas: &RegionAtlas,
    plp: &ParametricLp,
    k: usize,
    theta: &[f64],
) -> Result<(f64, bool, Vec<f64>), PrivacyError> {
    let x = crate::mplp::reconstruct_solution(atlas, k, theta)?;
    if plp.max_violation(&x, theta) > VIOLATION_THRESHOLD {
        let xp = project_feasible(&x, plp, theta)?;
        Ok((plp.objective(&xp), true, xp))
    } else {
        Ok((plp.objective(&x), false, x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffBound {
    pub true_region: usize,
    pub optimal_cost: f64,
    /// Cost excess of releasing each region (index `k - 1`).
    pub delta_j: Vec<f64>,
    pub delta_j_max: f64,
    pub margin: f64,
    /// Exact probability of releasing a wrong region.
    pub p_err: f64,
    /// `(K - 1) exp(-beta m)`.
    pub mis_selection_bound: f64,
    /// `delta_j_max (K - 1) exp(-beta m)`.
    pub bound: f64,
    /// Exact conditional expectation `sum_k p_k delta_j_k`.
    pub expected_delta_j: f64,
}

/// Cost-excess table and mis-selection bound at `theta` for logits `s` and
/// inverse temperature `beta`.
pub fn tradeoff_bound(logits: &[f64], beta: f64, atlas: &RegionAtlas, plp: &ParametricLp, theta: &[f64]) -> Result<TradeoffBound, PrivacyError> {
    let k_true = locate_region(atlas, theta)?;
    // The true region's own map gives the optimum, so its excess is exactly zero.
    let j_star = plp.objective(&atlas.region(k_true)?.solution(theta));
    let delta_j: Vec<f64> = (1..=atlas.k())
        .map(|k| Ok(evaluate_region_choice(atlas, plp, k, theta)?.0 - j_star))
        .collect::<Result<_, PrivacyError>>()?;
    let delta_j_max = delta_j.iter().copied().fold(0.0, f64::max);
    let m = margin(logits, k_true);
    let p = softmax_probs(logits, beta);
    let p_err = 1.0 - p[k_true - 1];
    let mis = mis_selection_bound(atlas.k(), beta, m);
    Ok(TradeoffBound {
        true_region: k_true,
        optimal_cost: j_star,
        expected_delta_j: p.iter().zip(&delta_j).map(|(a, b)| a * b).sum(),
        delta_j,
        delta_j_max,
        margin: m,
        p_err,
        mis_selection_bound: mis,
        bound: delta_j_max * mis,
    })
}

/// `(K - 1) exp(-beta m)`.
pub fn mis_selection_bound(k: usize, beta: f64, margin: f64) -> f64 {
    (k as f64 - 1.0) * (-beta * margin).exp()
}

/// The bias-free circuit form, with the noise-free margin `m0`:
/// `delta_j_max (K - 1) exp(-beta (1 - gamma) m0)`.
pub fn tradeoff_bound_noise_form(delta_j_max: f64, k: usize, beta: f64, gamma: f64, margin0: f64) -> f64 {
    delta_j_max * mis_selection_bound(k, beta * (1.0 - gamma), margin0)
}

/// The privacy-parameterized form
/// `delta_j_max (K - 1) exp(-m0 eps_reg / (4 L_enc delta_theta ||W||))`.
pub fn tradeoff_bound_eps_form(delta_j_max: f64, k: usize, margin0: f64, eps_reg: f64, l_enc: f64, delta_theta: f64, w_norm: f64) -> f64 {
    delta_j_max * (k as f64 - 1.0) * (-margin0 * eps_reg / (4.0 * l_enc * delta_theta * w_norm)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_epsilon_examples() {
        assert_eq!(empirical_epsilon(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        let e = empirical_epsilon(&[0.9, 0.1], &[0.8, 0.2]);
        assert!((e - 2f64.ln()).abs() < 1e-12);
        assert_eq!(empirical_epsilon(&[1.0, 0.0], &[0.5, 0.5]), f64::INFINITY);
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(epsilon_percentile(&[2.5; 10], 0.95), Some(2.5));
        let v: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        assert!((epsilon_percentile(&v, 0.95).unwrap() - 95.05).abs() < 1e-12);
        let mut w = v.clone();
        w.push(f64::INFINITY);
        assert!((epsilon_percentile(&w, 0.95).unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(epsilon_percentile(&[f64::INFINITY], 0.95), None);
    }

    #[test]
    fn lipschitz_formula() {
        let pi = std::f64::consts::PI;
        let mut one = CircuitConfig::new(1, 1, 1).unwrap();
        one.scale = pi;
        assert!((encoding_lipschitz(&one) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let mut ident = CircuitConfig::with_pattern(5, 6, 5, (0..5).collect()).unwrap();
        ident.scale = pi;
        let want = 6.0 * std::f64::consts::FRAC_PI_2 * 5f64.sqrt();
        assert!((encoding_lipschitz(&ident) - want).abs() < 1e-12);
        // cyclic tiling of 3 components on 5 qubits: multiplicities (2, 2, 1)
        let mut tiled = CircuitConfig::new(5, 6, 3).unwrap();
        tiled.scale = pi;
        assert!((encoding_lipschitz(&tiled) - 6.0 * std::f64::consts::FRAC_PI_2 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn theoretical_and_inverse() {
        assert_eq!(theoretical_epsilon(1.0, 1.0, 3.0, 0.05, 2.0), 0.0);
        assert!((theoretical_epsilon(1.0, 0.5, 1.0, 0.05, 2.0) - 0.2).abs() < 1e-15);
        assert!((theoretical_epsilon(2.0, 0.5, 1.0, 0.05, 2.0) - 0.4).abs() < 1e-15);
        assert!((required_beta(0.2, 0.5, 1.0, 0.05, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let aware = required_beta(1.0, 0.3, 2.0, 0.05, 1.5).unwrap();
        let unaware = required_beta(1.0, 0.0, 2.0, 0.05, 1.5).unwrap();
        assert!((aware / unaware - 1.0 / 0.7).abs() < 1e-12);
        assert!(matches!(required_beta(1.0, 1.0, 1.0, 0.05, 1.0), Err(PrivacyError::UnboundedBeta)));
        for eps in [0.1, 1.0, 7.3] {
            let b = required_beta(eps, 0.2, 4.0, 0.05, 1.1).unwrap();
            assert!((theoretical_epsilon(b, 0.2, 4.0, 0.05, 1.1) - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn wasted_budget_examples() {
        assert!((wasted_budget(10.0, 0.2) - 2.0).abs() < 1e-15);
        assert_eq!(wasted_budget(10.0, 0.0), 0.0);
        assert!((wasted_budget(3.0, 0.4) - 2.0 * wasted_budget(3.0, 0.2)).abs() < 1e-15);
    }

    #[test]
    fn mis_selection_examples() {
        assert!((10.0 * mis_selection_bound(2, 1.0, 2.0) - 1.353_352_832_366_127).abs() < 1e-12);
        assert_eq!(mis_selection_bound(7, 3.0, 0.0), 6.0);
        assert!(mis_selection_bound(3, 1e6, 1.0) < 1e-300);
    }

    #[test]
    fn pairs_are_adjacent_and_inside() {
        let spec = AdjacencySpec {
            delta_theta: 0.05,
            pair_count: 500,
            seed: 3,
        };
        let p = AdjacentPairs::generate(&spec, 3).unwrap();
        assert_eq!(p.pairs.len(), 500);
        for (a, b) in &p.pairs {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!((d - 0.05).abs() < 1e-12);
            assert!(b.iter().all(|v| v.abs() <= 1.0));
        }
        assert_eq!(p, AdjacentPairs::generate(&spec, 3).unwrap());
    }

    #[test]
    fn report_json_round_trips_infinity() {
        let r = summarize("x", 0.0, 1.0, None, 0.05, vec![(1.0, 0), (f64::INFINITY, 1)], None, None);
        assert_eq!(r.saturated, 1);
        let back: PrivacyReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back.eps_emp[1], f64::INFINITY);
    }
}
