//! Acceptance suite: one PASS/FAIL line per criterion; the process fails if any
//! criterion fails. Built without the libtest harness so the lines are always
//! shown. Run with `cargo test -p qpopf-cli --test acceptance`.

use qpopf_core::circuit::*;
use qpopf_core::classifier::*;
use qpopf_core::eval::*;
use qpopf_core::grid::{builtin_case, linearize, ParametricLp, ThetaBox};
use qpopf_core::matrix::Matrix;
use qpopf_core::mplp::{enumerate_regions, max_objective_error, RegionAtlas};
use qpopf_core::privacy::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

/// Shared 69-bus setup: atlas, held-out split and both trained classifiers.
struct Fixture {
    plp: ParametricLp,
    atlas: RegionAtlas,
    test: Dataset,
    vqc: VqcModel,
    mlp: MlpBaseline,
    seconds: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let start = Instant::now();
        let plp = linearize(&builtin_case("case69").unwrap().unwrap()).unwrap();
        let atlas = enumerate_regions(&plp, 3000, 7).unwrap();
        let data = Dataset::sample(&atlas, 3000, 11).unwrap();
        let (train, test) = data.split(0.8);
        let tc = TrainConfig::default();
        assert_eq!(tc.epochs, 30);
        let cfg = CircuitConfig::new(5, 6, atlas.m).unwrap();
        let (vqc, _) = train_vqc(&train, Some(&test), cfg, atlas.k(), false, &tc).unwrap();
        let (mlp, _) = train_mlp(&train, Some(&test), atlas.m, atlas.k(), &MlpConfig::default(), &tc).unwrap();
        Fixture {
            plp,
            atlas,
            test,
            vqc,
            mlp,
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

const AUDIT_GAMMAS: [f64; 6] = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9];
const AUDIT_BETAS: [f64; 8] = [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0];
const DELTA_THETA: f64 = 0.05;

/// Exact-probability audits of the trained circuit over the 6 x 8 grid with
/// 1000 adjacent pairs each, indexed `[gamma][beta]`.
fn audit_grid() -> &'static Vec<Vec<PrivacyReport>> {
    static GRID: OnceLock<Vec<Vec<PrivacyReport>>> = OnceLock::new();
    GRID.get_or_init(|| {
        let f = fixture();
        let pairs = AdjacentPairs::generate(
            &AdjacencySpec {
                delta_theta: DELTA_THETA,
                pair_count: 1000,
                seed: 21,
            },
            f.atlas.m,
        )
        .unwrap();
        let states = circuit_states(&f.vqc, &pairs).unwrap();
        AUDIT_GAMMAS
            .iter()
            .map(|&g| {
                AUDIT_BETAS
                    .iter()
                    .map(|&b| audit_vqc_states(&f.vqc, g, b, DELTA_THETA, &states).unwrap())
                    .collect()
            })
            .collect()
    })
}

fn random_params(cfg: &CircuitConfig, rng: &mut ChaCha8Rng) -> VqcParams {
    VqcParams {
        phi: (0..cfg.layers).map(|_| (0..cfg.n_q).map(|_| rng.random_range(-PI..PI)).collect()).collect(),
    }
}

fn depolarizing_contraction() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = StateVector::random(5, &mut rng);
        let h0 = features(&s, 0.0).unwrap();
        for g in 0..=10 {
            let gamma = g as f64 / 10.0;
            for (a, b) in features(&s, gamma).unwrap().iter().zip(&h0) {
                worst = worst.max((a - (1.0 - gamma) * b).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "max deviation {worst:e}");
    format!("1000 states x 11 gamma, max deviation {worst:.1e}")
}

fn parameter_shift() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let cfg = CircuitConfig::new(3, 2, 2).unwrap();
        let params = random_params(&cfg, &mut rng);
        let theta = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let gamma = rng.random_range(0.0..0.5);
        let head = LinearHead {
            weights: Matrix::from_row_major(4, 3, (0..12).map(|_| rng.random_range(-2.0..2.0)).collect()),
            bias: None,
            beta: 1.0,
        };
        let label = rng.random_range(1..=4);
        let loss = |h: &[f64]| {
            let (l, ds) = cross_entropy(&head.logits(h), 1.0, label);
            (l, head.weights.tr_mul_vec(&ds))
        };
        let grad = param_shift_grad(&cfg, &params, &theta, gamma, &loss).unwrap();
        let flat = params.flat();
        let value = |p: &[f64]| {
            let s = run_circuit(&cfg, &VqcParams::from_flat(&cfg, p), &theta).unwrap();
            loss(&features(&s, gamma).unwrap()).0
        };
        let h = 1e-5;
        for i in 0..flat.len() {
            let (mut up, mut dn) = (flat.clone(), flat.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (value(&up) - value(&dn)) / (2.0 * h);
            let err = (grad[i] - fd).abs();
            assert!(err <= 1e-6, "component {i}: shift {} vs difference {fd}", grad[i]);
            worst = worst.max(err);
        }
    }
    format!("20 circuits, max componentwise error {worst:.1e}")
}

fn mplp_oracle() -> String {
    // min x  s.t.  x >= theta,  x >= 0,  x <= 1  over theta in [-1, 1]
    let toy = ParametricLp::from_parts(
        vec![1.0],
        Matrix::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0]], 1),
        vec![0.0, 0.0, 1.0],
        Matrix::from_rows(&[vec![-1.0], vec![0.0], vec![0.0]], 1),
        ThetaBox::new(vec![-1.0], vec![1.0]),
    )
    .unwrap();
    let atlas = enumerate_regions(&toy, 200, 3).unwrap();
    assert_eq!(atlas.k(), 2, "toy regions");
    let mut maps: Vec<(f64, f64)> = atlas.regions.iter().map(|r| (r.f_map.get(0, 0), r.f[0])).collect();
    maps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(maps, vec![(0.0, 0.0), (1.0, 0.0)]);

    let f = fixture();
    let batch = ScenarioBatch::uniform(f.atlas.m, 1000, 103);
    let err = max_objective_error(&f.atlas, &f.plp, &batch.thetas).unwrap();
    assert!(err <= 1e-8, "objective error {err:e}");
    format!("toy: 2 regions (1,0),(0,0); case69: K={}, max objective error {err:.1e} on 1000 samples", f.atlas.k())
}

fn privacy_bound_soundness() -> String {
    let grid = audit_grid();
    let mut checked = 0;
    let mut tightest: f64 = 0.0;
    for row in grid {
        for r in row {
            let reg = r.eps_reg.unwrap();
            let violations = r.eps_emp.iter().filter(|&&e| e.is_nan() || e > reg).count();
            assert_eq!(violations, 0, "gamma {} beta {}: {violations} pairs exceed {reg}", r.gamma, r.beta);
            checked += r.eps_emp.len();
            if reg > 0.0 {
                tightest = tightest.max(r.eps_max / reg);
            }
        }
    }
    format!("{checked} audited pairs, zero violations, largest eps_emp/eps_reg {tightest:.3}")
}

fn cost_excess_bound_soundness() -> String {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let gamma = 0.2;
    let betas = [1.0, 4.0];
    let draws = 10_000;
    let mut audited = 0;
    let mut worst_slack = f64::INFINITY;
    while audited < 100 {
        let theta: Vec<f64> = (0..f.atlas.m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let s = f.vqc.logits(&theta, gamma).unwrap();
        let tb = tradeoff_bound(&s, betas[0], &f.atlas, &f.plp, &theta).unwrap();
        if tb.margin <= 0.0 {
            continue;
        }
        audited += 1;
        for &beta in &betas {
            let bound = tb.delta_j_max * mis_selection_bound(f.atlas.k(), beta, tb.margin);
            let p = softmax_probs(&s, beta);
            let samples: Vec<f64> = (0..draws).map(|_| tb.delta_j[sample_region(&p, &mut rng) - 1]).collect();
            let mean = samples.iter().sum::<f64>() / draws as f64;
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!(mean <= bound + 3.0 * se, "theta {theta:?} beta {beta}: mean {mean} > bound {bound} + 3 se {se}");
            worst_slack = worst_slack.min(bound + 3.0 * se - mean);
        }
    }
    format!("100 theta x 2 beta x {draws} draws at gamma {gamma}, zero violations, min slack {worst_slack:.2e}")
}

fn margin_scaling() -> String {
    let f = fixture();
    assert!(f.vqc.head.bias.is_none(), "head must be bias-free");
    let batch = ScenarioBatch::uniform(f.atlas.m, 1000, 105);
    let mut worst: f64 = 0.0;
    for theta in &batch.thetas {
        let s0 = f.vqc.logits(theta, 0.0).unwrap();
        for k in 1..=f.atlas.k() {
            let m0 = margin(&s0, k);
            for gamma in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let mg = margin(&f.vqc.logits(theta, gamma).unwrap(), k);
                worst = worst.max((mg - (1.0 - gamma) * m0).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "max deviation {worst:e}");
    format!("1000 points x {} classes x 5 gamma, max deviation {worst:.1e}", f.atlas.k())
}

fn qubit_budget_totals() -> String {
    let totals: Vec<usize> = budget_table().iter().map(|r| r.direct_total).collect();
    assert_eq!(totals, vec![596, 810, 1024, 680, 894, 1108, 978, 1192, 1406]);
    assert!(budget_table().iter().all(|r| r.ours == 5));
    format!("direct totals {totals:?}, proposed 5")
}

fn runtime_equation() -> String {
    let r = runtime_model(5, 6);
    assert_eq!(r.depth, 37);
    assert_eq!(r.micros, 1.37);
    format!("D = {}, T = {} us", r.depth, r.micros)
}

fn trends() -> String {
    let grid = audit_grid();
    for (gi, row) in grid.iter().enumerate() {
        for bi in 0..row.len() {
            let e = row[bi].eps95;
            assert!(e.is_finite(), "saturated eps95 at gamma {} beta {}", AUDIT_GAMMAS[gi], AUDIT_BETAS[bi]);
            if bi > 0 {
                assert!(e >= row[bi - 1].eps95, "eps95 falls with beta at gamma {}: {:?}", AUDIT_GAMMAS[gi], row.iter().map(|r| r.eps95).collect::<Vec<_>>());
            }
            if gi > 0 {
                assert!(e <= grid[gi - 1][bi].eps95, "eps95 rises with gamma at beta {}", AUDIT_BETAS[bi]);
            }
        }
    }

    let f = fixture();
    let batch = ScenarioBatch::uniform(f.atlas.m, 1000, 106);
    let table = ScenarioTable::new(&f.atlas, &f.plp, &batch).unwrap();
    let gammas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let n = table.len() as f64;
    let within = |a: f64, b: f64, sa: f64, sb: f64| (a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt() + 1e-12;
    let acc_se = |p: f64| (p * (1.0 - p) / n).sqrt();
    for beta in [1e3, 1e4] {
        let reports = sweep(&f.vqc, &table, &gammas, &[beta], 107).unwrap();
        let base = &reports[0];
        for r in &reports[1..] {
            assert!(within(r.cost_gap, base.cost_gap, r.cost_gap_se, base.cost_gap_se), "cost gap at gamma {} beta {beta}", r.gamma.unwrap_or(0.0));
            assert!(
                within(r.infeasibility_rate, base.infeasibility_rate, r.infeasibility_se, base.infeasibility_se),
                "infeasibility at gamma {} beta {beta}",
                r.gamma.unwrap_or(0.0)
            );
            assert!(
                within(r.stochastic_accuracy, base.stochastic_accuracy, acc_se(r.stochastic_accuracy), acc_se(base.stochastic_accuracy)),
                "accuracy at gamma {} beta {beta}",
                r.gamma.unwrap_or(0.0)
            );
        }
    }
    let first = &grid[0];
    format!(
        "eps95 monotone on the 6x8 grid (gamma=0: {:.3} at beta 0.1 .. {:.1} at beta 1000); metrics gamma-invariant at beta 1e3, 1e4",
        first[0].eps95, first[7].eps95
    )
}

fn comparative() -> String {
    let start = Instant::now();
    let f = fixture();
    // (a) noise-free held-out accuracy.
    let acc_vqc = f.vqc.accuracy(&f.test).unwrap();
    let acc_mlp = f.mlp.accuracy(&f.test);
    assert!(acc_vqc >= 0.9 && acc_mlp >= 0.9, "accuracy vqc {acc_vqc} mlp {acc_mlp}");

    // (c) gamma = 0, beta = 1, no logit noise on the MLP.
    let pairs = AdjacentPairs::generate(
        &AdjacencySpec {
            delta_theta: DELTA_THETA,
            pair_count: 100,
            seed: 31,
        },
        f.atlas.m,
    )
    .unwrap();
    let states = circuit_states(&f.vqc, &pairs).unwrap();
    let draws = 200;
    let mut mlp = f.mlp.clone();
    mlp.beta = 1.0;
    let vqc_eps = audit_vqc_states(&f.vqc, 0.0, 1.0, DELTA_THETA, &states).unwrap().eps95;
    let mlp_eps = audit_mlp(&mlp, 0.0, &pairs, draws, 32).eps95;
    assert!(vqc_eps < mlp_eps, "eps95 vqc {vqc_eps} vs mlp {mlp_eps}");

    // (b) matched privacy levels below the noise-free MLP's.
    let batch = ScenarioBatch::uniform(f.atlas.m, 1000, 108);
    let table = ScenarioTable::new(&f.atlas, &f.plp, &batch).unwrap();
    let mut rows = Vec::new();
    for frac in [0.25, 0.5, 0.75] {
        let target = frac * mlp_eps;
        let cb = calibrate_beta(&f.vqc, 0.0, target, DELTA_THETA, &states).unwrap();
        let cs = calibrate_sigma(&mlp, target, &pairs, draws, 32).unwrap();
        let v = evaluate_with(&VqcSelector { model: &f.vqc, gamma: 0.0, beta: cb.beta }, &table, 109).unwrap();
        let m = evaluate_with(&MlpSelector { model: &mlp, sigma: cs.sigma, beta: 1.0 }, &table, 109).unwrap();
        assert!(
            v.cost_gap < m.cost_gap && v.infeasibility_rate < m.infeasibility_rate,
            "target {target:.3}: vqc (beta {:.3}) gap {:.5} infeas {:.3} vs mlp (sigma {:.3}) gap {:.5} infeas {:.3}",
            cb.beta,
            v.cost_gap,
            v.infeasibility_rate,
            cs.sigma,
            m.cost_gap,
            m.infeasibility_rate
        );
        rows.push(format!(
            "eps {target:.3}: vqc gap {:.2e}/infeas {:.3} vs mlp {:.2e}/{:.3}",
            v.cost_gap, v.infeasibility_rate, m.cost_gap, m.infeasibility_rate
        ));
    }
    let total = f.seconds + start.elapsed().as_secs_f64();
    assert!(total < 1800.0, "took {total:.0} s including training");
    format!(
        "accuracy vqc {acc_vqc:.3} mlp {acc_mlp:.3}; eps95 at beta 1 vqc {vqc_eps:.3} < mlp {mlp_eps:.3}; {}; {total:.0} s incl. training",
        rows.join("; ")
    )
}

fn run_pipeline(dir: &Path) {
    let bin = env!("CARGO_BIN_EXE_qpopf");
    let steps: &[&[&str]] = &[
        &["regions", "--case", "toy2", "--budget", "300", "--seed", "5"],
        &["train", "--samples", "600", "--epochs", "5", "--seed", "6"],
        &["train", "--kind", "mlp", "--samples", "600", "--epochs", "5", "--seed", "6"],
        &["audit", "--pairs", "50", "--beta", "2", "--seed", "7"],
        &["audit", "--pairs", "50", "--lenc", "empirical", "--calibrate-eps", "0.2", "--seed", "7", "--out", "out/audit-cal.json"],
        &["audit", "--model", "out/model-mlp.json", "--pairs", "30", "--draws", "50", "--sigma", "0.5", "--seed", "7"],
        &["eval", "--case", "toy2", "--oracle", "--scenarios", "200", "--seed", "8"],
        &["eval", "--case", "toy2", "--scenarios", "200", "--gamma", "0.1", "--seed", "8"],
        &["eval", "--case", "toy2", "--model", "out/model-mlp.json", "--scenarios", "200", "--sigma", "0.3", "--seed", "8", "--speedup-mlp", "out/model-mlp.json"],
        &["sweep", "--case", "toy2", "--scenarios", "40", "--seed", "9"],
        &["budget"],
        &["report"],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(["--out-dir", "out"])
            .args(*args)
            .current_dir(dir)
            .env_remove("QPOPF_OUT_DIR")
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn cli_determinism() -> String {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path());
    run_pipeline(b.path());
    let mut names: Vec<String> = std::fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut compared = 0;
    for name in &names {
        // Wall-clock timings are the only nondeterministic output.
        if name == "speedup.csv" {
            continue;
        }
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
        compared += 1;
    }
    assert!(compared >= 15, "only {compared} outputs: {names:?}");
    format!("{compared} JSON/CSV/report outputs bitwise identical across two runs (speedup.csv timings excluded)")
}

type Criterion = (&'static str, f64, fn() -> String);

fn main() {
    let setup = Instant::now();
    fixture();
    println!("setup: case69 atlas and both classifiers ready in {:.1} s", setup.elapsed().as_secs_f64());

    let criteria: [Criterion; 11] = [
        ("depolarizing contraction", 5.0, depolarizing_contraction),
        ("parameter-shift correctness", 10.0, parameter_shift),
        ("MP-LP oracle equivalence", 60.0, mplp_oracle),
        ("privacy bound soundness", 300.0, privacy_bound_soundness),
        ("cost-excess bound soundness", 600.0, cost_excess_bound_soundness),
        ("margin scaling", f64::INFINITY, margin_scaling),
        ("qubit budget table", f64::INFINITY, qubit_budget_totals),
        ("circuit latency model", f64::INFINITY, runtime_equation),
        ("noise and temperature trends", f64::INFINITY, trends),
        ("comparative ordering vs MLP", f64::INFINITY, comparative),
        ("end-to-end determinism", f64::INFINITY, cli_determinism),
    ];
    let mut failed = Vec::new();
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) if secs <= limit => println!("PASS  {name} ({secs:.2} s): {detail}"),
            Ok(detail) => {
                println!("FAIL  {name} ({secs:.2} s): exceeded {limit} s; {detail}");
                failed.push(name);
            }
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name} ({secs:.2} s): {msg}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: {} of {} criteria failed: {failed:?}", failed.len(), criteria.len());
        std::process::exit(1);
    }
}
