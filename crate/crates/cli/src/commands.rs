//! Subcommand implementations.

use crate::args::*;
use crate::artifact::*;
use crate::config::{self, pick, FileConfig};
use crate::CliError;
use anyhow::{anyhow, Context};
use qpopf_core::circuit::{CircuitConfig, ENCODING_SCALE};
use qpopf_core::classifier::*;
use qpopf_core::eval::*;
use qpopf_core::mplp::{enumerate_regions_with, EnumerateOptions, RegionAtlas};
use qpopf_core::privacy::*;
use qpopf_core::provenance::derive_seed;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub struct Ctx {
    pub file: FileConfig,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn out(&self, flag: Option<PathBuf>, name: &str) -> PathBuf {
        flag.unwrap_or_else(|| self.out_dir.join(name))
    }

    fn input(&self, flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> PathBuf {
        flag.or_else(|| file.clone()).unwrap_or_else(|| self.out_dir.join(name))
    }

    fn case(&self, flag: Option<String>) -> String {
        pick(flag, &self.file.case, "case69".to_string())
    }
}

fn input(role: &str, sha256: &str) -> InputHash {
    InputHash {
        role: role.into(),
        sha256: sha256.into(),
    }
}

/// A trained classifier of either family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Vqc(VqcModel),
    Mlp(MlpBaseline),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Vqc(_) => ModelKind::Vqc,
            Classifier::Mlp(_) => ModelKind::Mlp,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub classifier: Classifier,
    /// Content hash of the parametric LP whose atlas labeled the training data.
    pub plp_hash: String,
    pub k: usize,
    pub m: usize,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub log: Vec<EpochLog>,
}

// ---------------------------------------------------------------- regions

#[derive(Debug, Serialize, Deserialize)]
pub struct RegionsConfig {
    pub budget: usize,
    pub validation_samples: usize,
    pub seed: u64,
}

pub fn regions(ctx: &Ctx, a: RegionsArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let cfg = RegionsConfig {
        budget: config::at_least_one("budget", pick(a.budget, &f.budget, 3000))?,
        validation_samples: pick(a.validation_samples, &f.validation_samples, 2000),
        seed: pick(a.seed, &f.seed, 7),
    };
    let case = load_case(&ctx.case(a.case.case))?;
    let out = ctx.out(a.out, "atlas.json");
    let atlas = enumerate_regions_with(
        &case.plp,
        &EnumerateOptions {
            budget: cfg.budget,
            seed: cfg.seed,
            validation_samples: cfg.validation_samples,
        },
    )
    .context("critical-region enumeration failed")?;
    let artifact = Artifact {
        provenance: Provenance::new("regions", &cfg, vec![input("case", &case.sha256)]),
        config: cfg,
        data: atlas,
    };
    write_json(&out, &artifact)?;
    let atlas = &artifact.data;
    println!(
        "regions: case {} -> K={} coverage={:.4} degenerate={} (n={}, q={}, m={}) -> {}",
        case.case.name,
        atlas.k(),
        atlas.coverage,
        atlas.degenerate_count(),
        case.plp.n(),
        case.plp.q(),
        case.plp.m(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainSettings {
    pub kind: ModelKind,
    pub samples: usize,
    pub train_frac: f64,
    pub data_seed: u64,
    pub train: TrainConfig,
    pub circuit: Option<CircuitConfig>,
    pub head_bias: bool,
    pub mlp: Option<MlpConfig>,
}

fn parse_schedule(s: &str) -> Result<LrSchedule, CliError> {
    match s {
        "cosine" => Ok(LrSchedule::Cosine),
        "constant" => Ok(LrSchedule::Constant),
        other => Err(CliError::Usage(format!("unknown schedule {other} (cosine, constant)"))),
    }
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let atlas_path = ctx.input(a.atlas, &f.atlas, "atlas.json");
    let atlas: Loaded<RegionAtlas> = load_data(&atlas_path, "atlas")?;
    let kind = pick(a.kind, &f.kind, ModelKind::Vqc);
    let seed = pick(a.seed, &f.seed, 0);
    let defaults = TrainConfig::default();
    let tc = TrainConfig {
        epochs: pick(a.epochs, &f.epochs, defaults.epochs),
        batch_size: config::at_least_one("batch_size", pick(a.batch_size, &f.batch_size, defaults.batch_size))?,
        learning_rate: config::positive("learning_rate", pick(a.learning_rate, &f.learning_rate, defaults.learning_rate))?,
        seed,
        adam: defaults.adam.clone(),
        train_beta: config::positive("train_beta", pick(a.train_beta, &f.train_beta, defaults.train_beta))?,
        schedule: match a.schedule.or_else(|| f.schedule.clone()) {
            Some(s) => parse_schedule(&s)?,
            None => defaults.schedule,
        },
    };
    let m = atlas.data.m;
    let circuit = match kind {
        ModelKind::Vqc => {
            let mut c = CircuitConfig::new(
                config::at_least_one("qubits", pick(a.qubits, &f.qubits, 5))?,
                config::at_least_one("layers", pick(a.layers, &f.layers, 6))?,
                m,
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            c.scale = config::positive("encoding_scale", pick(a.encoding_scale, &f.encoding_scale, ENCODING_SCALE))?;
            Some(c)
        }
        ModelKind::Mlp => None,
    };
    let train_frac = pick(a.train_frac, &f.train_frac, 0.8);
    config::check_range("train_frac", train_frac, train_frac > 0.0 && train_frac <= 1.0)?;
    let settings = TrainSettings {
        kind,
        samples: config::at_least_one("samples", pick(a.samples, &f.samples, 3000))?,
        train_frac,
        data_seed: derive_seed(seed, 1000),
        train: tc,
        circuit,
        head_bias: pick(a.head_bias, &f.head_bias, false),
        mlp: (kind == ModelKind::Mlp).then(MlpConfig::default),
    };
    let data = Dataset::sample(&atlas.data, settings.samples, settings.data_seed).context("sampling training data")?;
    let (tr, te) = data.split(settings.train_frac);
    let test = (!te.is_empty()).then_some(&te);
    let k = atlas.data.k();
    let (classifier, log) = match kind {
        ModelKind::Vqc => {
            let c = settings.circuit.clone().expect("circuit settings present");
            let (model, log) = train_vqc(&tr, test, c, k, settings.head_bias, &settings.train).context("training the circuit")?;
            (Classifier::Vqc(model), log)
        }
        ModelKind::Mlp => {
            let mc = settings.mlp.clone().expect("mlp settings present");
            let (model, log) = train_mlp(&tr, test, m, k, &mc, &settings.train).context("training the MLP")?;
            (Classifier::Mlp(model), log)
        }
    };
    let test_accuracy = match (&classifier, test) {
        (Classifier::Vqc(v), Some(t)) => Some(v.accuracy(t).context("scoring the held-out split")?),
        (Classifier::Mlp(p), Some(t)) => Some(p.accuracy(t)),
        _ => None,
    };
    let train_accuracy = match &classifier {
        Classifier::Vqc(v) => Some(v.accuracy(&tr).context("scoring the training split")?),
        Classifier::Mlp(p) => Some(p.accuracy(&tr)),
    };
    let out = ctx.out(a.out, &format!("model-{}.json", kind.name()));
    let provenance = Provenance::new("train", &settings, vec![input("atlas", &atlas.sha256)]);
    let mut body = csv::Writer::from_writer(Vec::new());
    body.write_record(["epoch", "loss", "train_accuracy", "test_accuracy"]).map_err(anyhow::Error::from)?;
    for e in &log {
        body.write_record([
            e.epoch.to_string(),
            e.loss.to_string(),
            e.train_accuracy.to_string(),
            e.test_accuracy.map_or(String::new(), |v| v.to_string()),
        ])
        .map_err(anyhow::Error::from)?;
    }
    let body = body.into_inner().map_err(|e| anyhow!("{e}"))?;
    write_csv(&out.with_extension("log.csv"), &provenance, &body)?;
    let artifact = Artifact {
        provenance,
        config: settings,
        data: Checkpoint {
            classifier,
            plp_hash: atlas.data.plp_hash.clone(),
            k,
            m,
            train_accuracy,
            test_accuracy,
            log,
        },
    };
    write_json(&out, &artifact)?;
    println!(
        "train: {} on {} points, {} epochs -> train accuracy {:.4}, test accuracy {} -> {}",
        kind.name(),
        tr.len(),
        artifact.config.train.epochs,
        train_accuracy.unwrap_or(0.0),
        test_accuracy.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- audit

#[derive(Debug, Serialize, Deserialize)]
pub struct AuditSettings {
    pub kind: ModelKind,
    pub gamma: f64,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub delta_theta: f64,
    pub pairs: usize,
    pub draws: usize,
    pub lenc: LencMode,
    pub calibrate_eps: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AuditOutput {
    pub report: PrivacyReport,
    pub lenc: LencMode,
    pub l_enc_analytic: Option<f64>,
    pub l_enc_empirical: Option<f64>,
    pub beta_calibration: Option<BetaCalibration>,
    pub sigma_calibration: Option<Calibration>,
}

pub fn audit(ctx: &Ctx, a: AuditArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let model_path = ctx.input(a.model, &f.model, "model-vqc.json");
    let ck: Loaded<Checkpoint> = load_data(&model_path, "checkpoint")?;
    let kind = ck.data.classifier.kind();
    let settings = AuditSettings {
        kind,
        gamma: config::gamma(pick(a.gamma, &f.gamma, 0.0))?,
        beta: a.beta.or(f.beta).map(|b| config::positive("beta", b)).transpose()?,
        sigma: a.sigma.or(f.sigma).map(|s| config::nonnegative("sigma", s)).transpose()?,
        delta_theta: config::positive("delta_theta", pick(a.delta_theta, &f.delta_theta, 0.05))?,
        pairs: config::at_least_one("pairs", pick(a.pairs, &f.pairs, 100))?,
        draws: config::at_least_one("draws", pick(a.draws, &f.draws, 200))?,
        lenc: pick(a.lenc, &f.lenc, LencMode::Analytic),
        calibrate_eps: a.calibrate_eps.or(f.calibrate_eps).map(|e| config::positive("calibrate_eps", e)).transpose()?,
        seed: pick(a.seed, &f.seed, 0),
    };
    let pairs = AdjacentPairs::generate(
        &AdjacencySpec {
            delta_theta: settings.delta_theta,
            pair_count: settings.pairs,
            seed: settings.seed,
        },
        ck.data.m,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let output = match &ck.data.classifier {
        Classifier::Vqc(model) => {
            let states = circuit_states(model, &pairs).context("simulating audit pairs")?;
            let calibration = match settings.calibrate_eps {
                Some(t) => Some(calibrate_beta(model, settings.gamma, t, settings.delta_theta, &states).context("calibrating beta")?),
                None => None,
            };
            let beta = calibration.as_ref().map(|c| c.beta).or(settings.beta).unwrap_or(1.0);
            let mut report = audit_vqc_states(model, settings.gamma, beta, settings.delta_theta, &states).context("auditing")?;
            let analytic = encoding_lipschitz(&model.circuit);
            let empirical = match settings.lenc {
                LencMode::Empirical => Some(lipschitz_estimate(model, &pairs).context("estimating L_enc")?),
                LencMode::Analytic => None,
            };
            if let Some(l) = empirical {
                let reg = theoretical_epsilon(beta, settings.gamma, l, settings.delta_theta, model.head.max_row_l1());
                report.l_enc = Some(l);
                report.eps_reg = Some(reg);
                report.bound_satisfied = Some(report.eps_emp.iter().all(|&e| e <= reg * (1.0 + 1e-12) + 1e-15));
            }
            AuditOutput {
                report,
                lenc: settings.lenc,
                l_enc_analytic: Some(analytic),
                l_enc_empirical: empirical,
                beta_calibration: calibration,
                sigma_calibration: None,
            }
        }
        Classifier::Mlp(model) => {
            let mut mlp = model.clone();
            mlp.beta = settings.beta.unwrap_or(model.beta);
            let noise_seed = derive_seed(settings.seed, 1);
            let calibration = match settings.calibrate_eps {
                Some(t) => Some(calibrate_sigma(&mlp, t, &pairs, settings.draws, noise_seed).context("calibrating sigma")?),
                None => None,
            };
            let sigma = calibration.as_ref().map(|c| c.sigma).or(settings.sigma).unwrap_or(model.sigma);
            let report = audit_mlp(&mlp, sigma, &pairs, settings.draws, noise_seed);
            AuditOutput {
                report,
                lenc: settings.lenc,
                l_enc_analytic: None,
                l_enc_empirical: None,
                beta_calibration: None,
                sigma_calibration: calibration,
            }
        }
    };
    let out = ctx.out(a.out, &format!("audit-{}.json", kind.name()));
    let r = &output.report;
    let summary = format!(
        "audit: {} gamma={} beta={:.6} sigma={} -> eps95={} eps_max={} saturated={} eps_reg={} bound_satisfied={} -> {}",
        kind.name(),
        r.gamma,
        r.beta,
        r.sigma.map_or("n/a".into(), |s| format!("{s:.6}")),
        fmt_eps(r.eps95),
        fmt_eps(r.eps_max),
        r.saturated,
        r.eps_reg.map_or("n/a".into(), |e| format!("{e:.6}")),
        r.bound_satisfied.map_or("n/a".into(), |b| b.to_string()),
        out.display()
    );
    let artifact = Artifact {
        provenance: Provenance::new("audit", &settings, vec![input("model", &ck.sha256)]),
        config: settings,
        data: output,
    };
    write_json(&out, &artifact)?;
    println!("{summary}");
    Ok(())
}

fn fmt_eps(e: f64) -> String {
    if e.is_finite() {
        format!("{e:.6}")
    } else {
        "inf".into()
    }
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalSettings {
    pub selector: String,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub scenarios: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub metrics: MetricsReport,
    /// Monte-Carlo mean of the optimal cost over the same scenarios.
    pub expected_cost: f64,
    pub regions: usize,
}

struct Inputs {
    case: CaseInput,
    atlas: Loaded<RegionAtlas>,
}

fn load_case_and_atlas(ctx: &Ctx, case: Option<String>, atlas: Option<PathBuf>) -> Result<Inputs, CliError> {
    let case = load_case(&ctx.case(case))?;
    let atlas: Loaded<RegionAtlas> = load_data(&ctx.input(atlas, &ctx.file.atlas, "atlas.json"), "atlas")?;
    atlas.data.check_plp(&case.plp).map_err(|e| CliError::Usage(format!("atlas does not belong to this case: {e}")))?;
    Ok(Inputs { case, atlas })
}

fn check_checkpoint(ck: &Checkpoint, atlas: &RegionAtlas) -> Result<(), CliError> {
    if ck.plp_hash != atlas.plp_hash || ck.k != atlas.k() {
        return Err(CliError::Usage("checkpoint was trained on a different atlas".into()));
    }
    Ok(())
}

pub fn eval(ctx: &Ctx, a: EvalArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let inp = load_case_and_atlas(ctx, a.case.case, a.atlas)?;
    let scenarios = config::at_least_one("scenarios", pick(a.scenarios, &f.scenarios, 1000))?;
    let seed = pick(a.seed, &f.seed, 0);
    let mut inputs = vec![input("case", &inp.case.sha256), input("atlas", &inp.atlas.sha256)];
    let ck: Option<Loaded<Checkpoint>> = if a.oracle {
        None
    } else {
        let ck: Loaded<Checkpoint> = load_data(&ctx.input(a.model, &f.model, "model-vqc.json"), "checkpoint")?;
        check_checkpoint(&ck.data, &inp.atlas.data)?;
        inputs.push(input("model", &ck.sha256));
        Some(ck)
    };
    let atlas = &inp.atlas.data;
    let plp = &inp.case.plp;
    let gamma = config::gamma(pick(a.gamma, &f.gamma, 0.0))?;
    let beta = config::positive("beta", pick(a.beta, &f.beta, 1.0))?;
    let sigma_flag = a.sigma.or(f.sigma).map(|s| config::nonnegative("sigma", s)).transpose()?;
    let (settings, selector): (EvalSettings, Box<dyn RegionSelector + '_>) = match ck.as_ref().map(|c| &c.data.classifier) {
        None => (
            EvalSettings {
                selector: "oracle".into(),
                gamma: None,
                beta: None,
                sigma: None,
                scenarios,
                seed,
            },
            Box::new(OracleSelector { atlas }),
        ),
        Some(Classifier::Vqc(model)) => (
            EvalSettings {
                selector: "vqc".into(),
                gamma: Some(gamma),
                beta: Some(beta),
                sigma: None,
                scenarios,
                seed,
            },
            Box::new(VqcSelector { model, gamma, beta }),
        ),
        Some(Classifier::Mlp(model)) => {
            let sigma = sigma_flag.unwrap_or(model.sigma);
            (
                EvalSettings {
                    selector: "mlp".into(),
                    gamma: None,
                    beta: Some(beta),
                    sigma: Some(sigma),
                    scenarios,
                    seed,
                },
                Box::new(MlpSelector { model, sigma, beta }),
            )
        }
    };
    let batch = ScenarioBatch::uniform(atlas.m, scenarios, seed);
    let table = ScenarioTable::new(atlas, plp, &batch).context("preparing scenarios")?;
    let metrics = evaluate_with(selector.as_ref(), &table, derive_seed(seed, 1)).context("evaluation failed")?;
    let expected = expected_cost(atlas, plp, &batch).context("expected cost")?;
    let out = ctx.out(a.out, &format!("metrics-{}.json", settings.selector));
    let provenance = Provenance::new("eval", &settings, inputs);
    if let Some(mlp_path) = a.speedup_mlp {
        let mlp_ck: Loaded<Checkpoint> = load_data(&mlp_path, "checkpoint")?;
        check_checkpoint(&mlp_ck.data, atlas)?;
        let Classifier::Mlp(mlp) = &mlp_ck.data.classifier else {
            return Err(CliError::Usage("--speedup-mlp needs an MLP checkpoint".into()));
        };
        let (n_q, layers) = match ck.as_ref().map(|c| &c.data.classifier) {
            Some(Classifier::Vqc(v)) => (v.circuit.n_q, v.circuit.layers),
            _ => (5, 6),
        };
        let timing = ScenarioBatch::uniform(atlas.m, scenarios.min(200), derive_seed(seed, 2));
        let rows = speedup_table(atlas, plp, mlp, n_q, layers, &timing).context("timing online paths")?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "runtime_us", "speedup"]).map_err(anyhow::Error::from)?;
        for r in &rows {
            w.write_record([r.method.clone(), format!("{:.3}", r.runtime_us), format!("{:.1}", r.speedup)])
                .map_err(anyhow::Error::from)?;
            println!("speedup: {:<26} {:>12.3} us {:>10.1}x", r.method, r.runtime_us, r.speedup);
        }
        let body = w.into_inner().map_err(|e| anyhow!("{e}"))?;
        write_csv(&ctx.out_dir.join("speedup.csv"), &provenance, &body)?;
    }
    let artifact = Artifact {
        provenance,
        config: settings,
        data: EvalOutput {
            metrics,
            expected_cost: expected,
            regions: atlas.k(),
        },
    };
    write_json(&out, &artifact)?;
    let m = &artifact.data.metrics;
    println!(
        "eval: {} over {} scenarios -> mae_mean={:.6} MW cost_gap={:.4}% infeasibility={:.2}% accuracy={:.4} expected_cost={:.6} -> {}",
        m.model,
        m.samples,
        m.mae_mean,
        100.0 * m.cost_gap,
        100.0 * m.infeasibility_rate,
        m.stochastic_accuracy,
        expected,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepSettings {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub scenarios: usize,
    pub seed: u64,
}

pub const DEFAULT_GAMMAS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_BETAS: [f64; 8] = [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0];

pub fn sweep_cmd(ctx: &Ctx, a: SweepArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let inp = load_case_and_atlas(ctx, a.case.case, a.atlas)?;
    let ck: Loaded<Checkpoint> = load_data(&ctx.input(a.model, &f.model, "model-vqc.json"), "checkpoint")?;
    check_checkpoint(&ck.data, &inp.atlas.data)?;
    let Classifier::Vqc(model) = &ck.data.classifier else {
        return Err(CliError::Usage("sweep needs a circuit checkpoint".into()));
    };
    let settings = SweepSettings {
        gammas: pick(a.gammas, &f.gammas, DEFAULT_GAMMAS.to_vec()),
        betas: pick(a.betas, &f.betas, DEFAULT_BETAS.to_vec()),
        scenarios: config::at_least_one("scenarios", pick(a.scenarios, &f.scenarios, 500))?,
        seed: pick(a.seed, &f.seed, 0),
    };
    for &g in &settings.gammas {
        config::gamma(g)?;
    }
    for &b in &settings.betas {
        config::positive("beta", b)?;
    }
    if settings.gammas.is_empty() || settings.betas.is_empty() {
        return Err(CliError::Usage("the gamma and beta grids must be nonempty".into()));
    }
    let atlas = &inp.atlas.data;
    let batch = ScenarioBatch::uniform(atlas.m, settings.scenarios, settings.seed);
    let table = ScenarioTable::new(atlas, &inp.case.plp, &batch).context("preparing scenarios")?;
    let reports = sweep(model, &table, &settings.gammas, &settings.betas, derive_seed(settings.seed, 1)).context("sweep failed")?;
    let mut body = Vec::new();
    write_heatmap_csv(&reports, &mut body).context("formatting heatmap")?;
    let out = ctx.out(a.out, "sweep.csv");
    let provenance = Provenance::new(
        "sweep",
        &settings,
        vec![
            input("case", &inp.case.sha256),
            input("atlas", &inp.atlas.sha256),
            input("model", &ck.sha256),
        ],
    );
    write_csv(&out, &provenance, &body)?;
    let json = out.with_extension("json");
    write_json(
        &json,
        &Artifact {
            provenance,
            config: settings,
            data: &reports,
        },
    )?;
    println!("sweep: {} grid points over {} scenarios -> {} and {}", reports.len(), batch.len(), out.display(), json.display());
    Ok(())
}

// ---------------------------------------------------------------- budget

#[derive(Debug, Serialize, Deserialize)]
pub struct BudgetSettings {
    pub n_vars: usize,
    pub n_cons: usize,
    pub qubits: usize,
    pub layers: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BudgetOutput {
    pub table: Vec<QubitBudget>,
    pub runtime: RuntimeEstimate,
}

pub fn budget(ctx: &Ctx, a: BudgetArgs) -> Result<(), CliError> {
    let f = &ctx.file;
    let settings = BudgetSettings {
        n_vars: pick(a.n_vars, &f.n_vars, BUDGET_VARS),
        n_cons: pick(a.n_cons, &f.n_cons, BUDGET_CONS),
        qubits: config::at_least_one("qubits", pick(a.qubits, &f.qubits, BUDGET_QUBITS))?,
        layers: pick(a.layers, &f.layers, 6),
    };
    let table: Vec<QubitBudget> = BUDGET_GRID
        .iter()
        .map(|&(b, y)| qubit_budget(b, y, settings.n_vars, settings.n_cons, settings.qubits))
        .collect();
    let runtime = runtime_model(settings.qubits, settings.layers);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["b", "Y", "variable_qubits", "slack_qubits", "direct_total", "ours"]).map_err(anyhow::Error::from)?;
    println!("{:>3} {:>3} {:>10} {:>8} {:>12} {:>6}", "b", "Y", "variables", "slack", "direct_qubo", "ours");
    for r in &table {
        println!(
            "{:>3} {:>3} {:>10} {:>8} {:>12} {:>6}",
            r.bits_per_variable, r.bits_per_slack, r.variable_qubits, r.slack_qubits, r.direct_total, r.ours
        );
        w.write_record(
            [r.bits_per_variable, r.bits_per_slack, r.variable_qubits, r.slack_qubits, r.direct_total, r.ours].map(|v| v.to_string()),
        )
        .map_err(anyhow::Error::from)?;
    }
    println!(
        "runtime model: n_q={} L={} depth={} T={} us",
        settings.qubits, settings.layers, runtime.depth, runtime.micros
    );
    let body = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    let out = ctx.out(a.out, "budget.csv");
    let provenance = Provenance::new("budget", &settings, Vec::new());
    write_csv(&out, &provenance, &body)?;
    write_json(
        &out.with_extension("json"),
        &Artifact {
            provenance,
            config: settings,
            data: BudgetOutput { table, runtime },
        },
    )?;
    Ok(())
}

// ---------------------------------------------------------------- report

/// Files the report looks for, in order.
const REPORT_JSON: [&str; 9] = [
    "atlas.json",
    "model-vqc.json",
    "model-mlp.json",
    "audit-vqc.json",
    "audit-mlp.json",
    "metrics-oracle.json",
    "metrics-vqc.json",
    "metrics-mlp.json",
    "budget.json",
];
const REPORT_CSV: [&str; 2] = ["sweep.csv", "budget.csv"];

fn summarize_json(name: &str, v: &serde_json::Value) -> Vec<String> {
    let d = &v["data"];
    let num = |x: &serde_json::Value| x.as_f64().map_or("n/a".to_string(), |f| format!("{f:.6}"));
    let mut lines = vec![format!(
        "- config_sha256: `{}`",
        v["provenance"]["config_sha256"].as_str().unwrap_or("?")
    )];
    if let Some(inputs) = v["provenance"]["inputs"].as_array() {
        for i in inputs {
            lines.push(format!(
                "- input {}: `{}`",
                i["role"].as_str().unwrap_or("?"),
                i["sha256"].as_str().unwrap_or("?")
            ));
        }
    }
    match name {
        "atlas.json" => {
            lines.push(format!("- regions: {}", d["regions"].as_array().map_or(0, |r| r.len())));
            lines.push(format!("- coverage: {}", num(&d["coverage"])));
        }
        n if n.starts_with("model-") => {
            lines.push(format!("- kind: {}", d["classifier"]["kind"].as_str().unwrap_or("?")));
            lines.push(format!("- train accuracy: {}", num(&d["train_accuracy"])));
            lines.push(format!("- test accuracy: {}", num(&d["test_accuracy"])));
        }
        n if n.starts_with("audit-") => {
            let r = &d["report"];
            for key in ["gamma", "beta", "sigma", "eps95", "eps_max", "eps_reg", "saturated", "bound_satisfied"] {
                lines.push(format!("- {key}: {}", r[key]));
            }
        }
        n if n.starts_with("metrics-") => {
            let m = &d["metrics"];
            for key in ["samples", "mae_mean", "cost_gap", "infeasibility_rate", "stochastic_accuracy"] {
                lines.push(format!("- {key}: {}", m[key]));
            }
            lines.push(format!("- expected_cost: {}", num(&d["expected_cost"])));
        }
        "budget.json" => {
            lines.push(format!(
                "- runtime model: depth {} -> {} us",
                d["runtime"]["depth"], d["runtime"]["micros"]
            ));
        }
        _ => {}
    }
    lines
}

pub fn report(ctx: &Ctx, a: ReportArgs) -> Result<(), CliError> {
    let dir = &ctx.out_dir;
    let mut doc = vec!["# qpopf run summary".to_string(), String::new()];
    let mut found = 0;
    for name in REPORT_JSON {
        let path = dir.join(name);
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        found += 1;
        doc.push(format!("## {name}"));
        doc.push(String::new());
        doc.extend(summarize_json(name, &v));
        doc.push(String::new());
    }
    for name in REPORT_CSV {
        let path = dir.join(name);
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        found += 1;
        doc.push(format!("## {name}"));
        doc.push(String::new());
        doc.push("```".into());
        doc.push(text.trim_end().to_string());
        doc.push("```".into());
        doc.push(String::new());
    }
    if dir.join("speedup.csv").exists() {
        found += 1;
        doc.push("## speedup.csv".into());
        doc.push(String::new());
        doc.push("- wall-clock timings of the online paths; see the file (not reproduced here so the report stays deterministic)".into());
        doc.push(String::new());
    }
    if found == 0 {
        return Err(CliError::Usage(format!("no outputs found in {}", dir.display())));
    }
    let out = ctx.out(a.out, "report.md");
    write_text(&out, &doc.join("\n"))?;
    println!("report: {found} outputs summarized -> {}", out.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
