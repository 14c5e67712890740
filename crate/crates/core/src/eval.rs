//! Monte-Carlo evaluation of randomized region release: dispatch error,
//! cost gap and infeasibility over scenario batches, (gamma, beta) sweeps,
//! the expected optimal cost, and the qubit-budget and runtime models.

use crate::classifier::{mlp_forward_noisy, sample_region, softmax_probs, ClassifierError, MlpBaseline, VqcModel};
use crate::grid::ParametricLp;
use crate::lp::solve_lp;
use crate::mplp::{locate_region, MplpError, RegionAtlas};
use crate::privacy::{evaluate_region_choice, PrivacyError};
use crate::provenance::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;
use thiserror::Error;

/// Optimal costs with magnitude below this are compared in absolute terms.
pub const COST_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation setting: {0}")]
    Config(String),
    #[error(transparent)]
    Mplp(#[from] MplpError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Normalized parameter samples for a Monte-Carlo study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBatch {
    pub thetas: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioBatch {
    /// `count` points uniform over `[-1, 1]^m`.
    pub fn uniform(m: usize, count: usize, seed: u64) -> Self {
        Self::from_distribution(count, seed, |rng| (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }

    /// `count` points from a caller-supplied sampler; points are clamped to the box.
    pub fn from_distribution(count: usize, seed: u64, mut draw: impl FnMut(&mut ChaCha8Rng) -> Vec<f64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas = (0..count)
            .map(|_| draw(&mut rng).into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
            .collect();
        Self { thetas, seed }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    fn check(&self, m: usize) -> Result<(), EvalError> {
        if self.is_empty() {
            return Err(EvalError::Config("scenario batch is empty".into()));
        }
        for t in &self.thetas {
            if t.len() != m || t.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(EvalError::Config(format!("scenario {t:?} is outside [-1, 1]^{m}")));
            }
        }
        Ok(())
    }
}

/// A randomized region-release mechanism.
pub trait RegionSelector: Sync {
    fn name(&self) -> String;
    fn k(&self) -> usize;
    /// Release distribution over 1-based region ids at `theta`; `rng` supplies
    /// any mechanism noise beyond the final categorical draw.
    fn release_probs(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EvalError>;
    /// `(gamma, beta, sigma)` as far as they apply.
    fn settings(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        (None, None, None)
    }
}

/// Always releases the true region.
pub struct OracleSelector<'a> {
    pub atlas: &'a RegionAtlas,
}

impl RegionSelector for OracleSelector<'_> {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn k(&self) -> usize {
        self.atlas.k()
    }

    fn release_probs(&self, theta: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EvalError> {
        let mut p = vec![0.0; self.atlas.k()];
        p[locate_region(self.atlas, theta)? - 1] = 1.0;
        Ok(p)
    }
}

/// Depolarized circuit at noise level `gamma`, released through `softmax(beta s)`.
pub struct VqcSelector<'a> {
    pub model: &'a VqcModel,
    pub gamma: f64,
    pub beta: f64,
}

impl RegionSelector for VqcSelector<'_> {
    fn name(&self) -> String {
        "vqc".into()
    }

    fn k(&self) -> usize {
        self.model.k()
    }

    fn release_probs(&self, theta: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EvalError> {
        Ok(self.model.probs(theta, self.gamma, self.beta)?)
    }

    fn settings(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        (Some(self.gamma), Some(self.beta), None)
    }
}

/// MLP logits plus one Gaussian noise draw per release, through `softmax(beta s)`.
pub struct MlpSelector<'a> {
    pub model: &'a MlpBaseline,
    pub sigma: f64,
    pub beta: f64,
}

impl RegionSelector for MlpSelector<'_> {
    fn name(&self) -> String {
        "mlp".into()
    }

    fn k(&self) -> usize {
        self.model.k()
    }

    fn release_probs(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>, EvalError> {
        let noisy = mlp_forward_noisy(self.model, theta, self.sigma, rng);
        Ok(softmax_probs(&noisy, self.beta))
    }

    fn settings(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        (None, Some(self.beta), Some(self.sigma))
    }
}

#[derive(Clone, Debug)]
struct Outcome {
    cost: f64,
    infeasible: bool,
    x: Vec<f64>,
}

#[derive(Debug)]
struct Scenario {
    true_region: usize,
    optimal_cost: f64,
    optimal_x: Vec<f64>,
    /// Lazily filled evaluation of each candidate region (index `k - 1`).
    outcomes: Vec<OnceLock<Outcome>>,
}

/// Per-scenario ground truth plus a cache of evaluated region choices, shared
/// across every mechanism evaluated on the same batch.
pub struct ScenarioTable<'a> {
    atlas: &'a RegionAtlas,
    plp: &'a ParametricLp,
    batch: &'a ScenarioBatch,
    scenarios: Vec<Scenario>,
}

impl<'a> ScenarioTable<'a> {
    /// Checks the atlas against the LP and locates every scenario's true region.
    pub fn new(atlas: &'a RegionAtlas, plp: &'a ParametricLp, batch: &'a ScenarioBatch) -> Result<Self, EvalError> {
        atlas.check_plp(plp)?;
        batch.check(atlas.m)?;
        let scenarios = batch
            .thetas
            .par_iter()
            .map(|theta| {
                let k = locate_region(atlas, theta)?;
                let x = atlas.region(k)?.solution(theta);
                Ok(Scenario {
                    true_region: k,
                    optimal_cost: plp.objective(&x),
                    optimal_x: x,
                    outcomes: (0..atlas.k()).map(|_| OnceLock::new()).collect(),
                })
            })
            .collect::<Result<_, EvalError>>()?;
        Ok(Self {
            atlas,
            plp,
            batch,
            scenarios,
        })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn batch(&self) -> &ScenarioBatch {
        self.batch
    }

    /// 1-based true region of scenario `i`.
    pub fn true_region(&self, i: usize) -> usize {
        self.scenarios[i].true_region
    }

    fn outcome(&self, i: usize, k: usize) -> Result<&Outcome, EvalError> {
        let cell = &self.scenarios[i].outcomes[k - 1];
        if let Some(o) = cell.get() {
            return Ok(o);
        }
        let (cost, infeasible, x) = evaluate_region_choice(self.atlas, self.plp, k, &self.batch.thetas[i])?;
        // A concurrent writer computes the identical value, so losing the race is harmless.
        let _ = cell.set(Outcome { cost, infeasible, x });
        Ok(cell.get().expect("cell was just filled"))
    }
}

/// Aggregated operational metrics of one mechanism on one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub tracked: Vec<String>,
    /// Mean absolute dispatch error per tracked variable (MW).
    pub mae: Vec<f64>,
    pub mae_mean: f64,
    /// Mean of `(J - J*) / J*`.
    pub cost_gap: f64,
    pub cost_gap_se: f64,
    pub infeasibility_rate: f64,
    pub infeasibility_se: f64,
    /// Fraction of releases equal to the true region.
    pub stochastic_accuracy: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Relative cost excess, or the absolute excess when `|J*|` is below [`COST_FLOOR`].
pub fn cost_gap(cost: f64, optimal: f64) -> f64 {
    if optimal.abs() < COST_FLOOR {
        cost - optimal
    } else {
        (cost - optimal) / optimal.abs()
    }
}

/// Evaluates `selector` on a prepared table. Scenario `i` draws its mechanism
/// noise and release from the stream `derive_seed(seed, i)`.
pub fn evaluate_with(selector: &dyn RegionSelector, table: &ScenarioTable, seed: u64) -> Result<MetricsReport, EvalError> {
    if selector.k() != table.atlas.k() {
        return Err(EvalError::Config(format!(
            "model has {} classes, the atlas {} regions",
            selector.k(),
            table.atlas.k()
        )));
    }
    let tracked = &table.plp.tracked;
    let per: Vec<(bool, bool, f64, Vec<f64>)> = (0..table.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let theta = &table.batch.thetas[i];
            let p = selector.release_probs(theta, &mut rng)?;
            let k = sample_region(&p, &mut rng);
            let sc = &table.scenarios[i];
            let o = table.outcome(i, k)?;
            let err: Vec<f64> = tracked.iter().map(|&j| (o.x[j] - sc.optimal_x[j]).abs()).collect();
            Ok((k == sc.true_region, o.infeasible, cost_gap(o.cost, sc.optimal_cost), err))
        })
        .collect::<Result<_, EvalError>>()?;
    let n = per.len();
    let mut mae = vec![0.0; tracked.len()];
    for (_, _, _, e) in &per {
        for (a, v) in mae.iter_mut().zip(e) {
            *a += v;
        }
    }
    mae.iter_mut().for_each(|a| *a /= n as f64);
    let gaps: Vec<f64> = per.iter().map(|r| r.2).collect();
    let infeas: Vec<f64> = per.iter().map(|r| r.1 as u8 as f64).collect();
    let (cost_gap, cost_gap_se) = mean_se(&gaps);
    let (infeasibility_rate, infeasibility_se) = mean_se(&infeas);
    let (gamma, beta, sigma) = selector.settings();
    Ok(MetricsReport {
        model: selector.name(),
        gamma,
        beta,
        sigma,
        samples: n,
        seed,
        tracked: tracked.iter().map(|&j| table.plp.var_names[j].clone()).collect(),
        mae_mean: if mae.is_empty() { 0.0 } else { mae.iter().sum::<f64>() / mae.len() as f64 },
        mae,
        cost_gap,
        cost_gap_se,
        infeasibility_rate,
        infeasibility_se,
        stochastic_accuracy: per.iter().filter(|r| r.0).count() as f64 / n as f64,
    })
}

/// One-shot evaluation of `selector` over `batch`.
pub fn evaluate(
    selector: &dyn RegionSelector,
    atlas: &RegionAtlas,
    plp: &ParametricLp,
    batch: &ScenarioBatch,
    seed: u64,
) -> Result<MetricsReport, EvalError> {
    let table = ScenarioTable::new(atlas, plp, batch)?;
    evaluate_with(selector, &table, seed)
}

/// Full factorial evaluation of the circuit over `gammas x betas`
/// (gamma-major order), with common random numbers across grid points.
pub fn sweep(model: &VqcModel, table: &ScenarioTable, gammas: &[f64], betas: &[f64], seed: u64) -> Result<Vec<MetricsReport>, EvalError> {
    let mut out = Vec::with_capacity(gammas.len() * betas.len());
    for &gamma in gammas {
        for &beta in betas {
            if !(beta > 0.0) || !(0.0..=1.0).contains(&gamma) {
                return Err(EvalError::Config(format!("grid point (gamma {gamma}, beta {beta}) is invalid")));
            }
            out.push(evaluate_with(&VqcSelector { model, gamma, beta }, table, seed)?);
        }
    }
    Ok(out)
}

/// Heatmap rows `gamma, beta, infeasibility_pct, cost_gap_pct, accuracy`.
pub fn write_heatmap_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "beta", "infeasibility_pct", "cost_gap_pct", "accuracy"])?;
    for r in reports {
        w.write_record([
            r.gamma.unwrap_or(0.0).to_string(),
            r.beta.unwrap_or(0.0).to_string(),
            (100.0 * r.infeasibility_rate).to_string(),
            (100.0 * r.cost_gap).to_string(),
            r.stochastic_accuracy.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Monte-Carlo estimate of the expected optimal cost from the exact region
/// maps (the probabilistic OPF answer).
pub fn expected_cost(atlas: &RegionAtlas, plp: &ParametricLp, batch: &ScenarioBatch) -> Result<f64, EvalError> {
    atlas.check_plp(plp)?;
    batch.check(atlas.m)?;
    let costs: Vec<f64> = batch
        .thetas
        .par_iter()
        .map(|t| {
            let k = locate_region(atlas, t)?;
            Ok(plp.objective(&atlas.region(k)?.solution(t)))
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(costs.iter().sum::<f64>() / costs.len() as f64)
}

/// Qubits needed to encode the dispatch problem directly as a binary
/// optimization, against the region classifier's register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitBudget {
    pub bits_per_variable: usize,
    pub bits_per_slack: usize,
    pub variable_qubits: usize,
    pub slack_qubits: usize,
    pub direct_total: usize,
    pub ours: usize,
}

pub fn qubit_budget(b: usize, y: usize, n_vars: usize, n_cons: usize, n_q_ours: usize) -> QubitBudget {
    QubitBudget {
        bits_per_variable: b,
        bits_per_slack: y,
        variable_qubits: b * n_vars,
        slack_qubits: y * n_cons,
        direct_total: b * n_vars + y * n_cons,
        ours: n_q_ours,
    }
}

/// Variable count, constraint count and register width of the reference budget table.
pub const BUDGET_VARS: usize = 42;
pub const BUDGET_CONS: usize = 214;
pub const BUDGET_QUBITS: usize = 5;

/// The nine `(b, Y)` precision settings of the reference budget table.
pub const BUDGET_GRID: [(usize, usize); 9] = [(4, 2), (4, 3), (4, 4), (6, 2), (6, 3), (6, 4), (8, 3), (8, 4), (8, 5)];

pub fn budget_table() -> Vec<QubitBudget> {
    BUDGET_GRID
        .iter()
        .map(|&(b, y)| qubit_budget(b, y, BUDGET_VARS, BUDGET_CONS, BUDGET_QUBITS))
        .collect()
}

/// Gate-model latency estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub depth: usize,
    pub micros: f64,
}

/// `D = 1 + L (1 + n_q)`, `T = t_prep_meas + t_gate D` (microseconds).
pub fn runtime_model_with(n_q: usize, layers: usize, t_prep_meas_us: f64, t_gate_us: f64) -> RuntimeEstimate {
    let depth = 1 + layers * (1 + n_q);
    RuntimeEstimate {
        depth,
        micros: t_prep_meas_us + t_gate_us * depth as f64,
    }
}

/// [`runtime_model_with`] at 1 µs preparation plus measurement and 10 ns per gate layer.
/// The sum is formed in integer nanoseconds so that tabulated values are exact decimals.
pub fn runtime_model(n_q: usize, layers: usize) -> RuntimeEstimate {
    let depth = 1 + layers * (1 + n_q);
    RuntimeEstimate {
        depth,
        micros: (1000 + 10 * depth) as f64 / 1000.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub method: String,
    pub runtime_us: f64,
    pub speedup: f64,
}

fn mean_micros<T>(items: &[T], mut f: impl FnMut(&T) -> Result<(), EvalError>) -> Result<f64, EvalError> {
    let start = Instant::now();
    for it in items {
        f(it)?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e6 / items.len() as f64)
}

/// Per-scenario online latency: the local LP solve (baseline), point
/// location plus affine map, MLP inference plus affine map (all measured
/// single-threaded), and the modeled circuit latency plus the measured affine map.
pub fn speedup_table(
    atlas: &RegionAtlas,
    plp: &ParametricLp,
    mlp: &MlpBaseline,
    n_q: usize,
    layers: usize,
    batch: &ScenarioBatch,
) -> Result<Vec<SpeedupRow>, EvalError> {
    atlas.check_plp(plp)?;
    batch.check(atlas.m)?;
    let thetas = &batch.thetas;
    let lp = mean_micros(thetas, |t| {
        solve_lp(plp, t).map_err(PrivacyError::from)?;
        Ok(())
    })?;
    let locate = mean_micros(thetas, |t| {
        let k = locate_region(atlas, t)?;
        std::hint::black_box(atlas.region(k)?.solution(t));
        Ok(())
    })?;
    let labels: Vec<usize> = thetas
        .iter()
        .map(|t| locate_region(atlas, t))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(&Vec<f64>, usize)> = thetas.iter().zip(labels).collect();
    let affine = mean_micros(&pairs, |(t, k)| {
        std::hint::black_box(atlas.region(*k)?.solution(t));
        Ok(())
    })?;
    let mlp_t = mean_micros(thetas, |t| {
        let k = crate::classifier::argmax_id(&mlp.logits(t));
        std::hint::black_box(atlas.region(k)?.solution(t));
        Ok(())
    })?;
    let vqc = runtime_model(n_q, layers).micros + affine;
    Ok([
        ("lp-solver", lp),
        ("constraint-check+affine", locate),
        ("mlp+affine", mlp_t),
        ("vqc-model+affine", vqc),
    ]
    .into_iter()
    .map(|(m, us)| SpeedupRow {
        method: m.to_string(),
        runtime_us: us,
        speedup: lp / us,
    })
    .collect())
}
