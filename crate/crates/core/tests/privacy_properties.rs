//! Privacy audit properties: soundness of the analytic epsilon bound, noise and
//! temperature trends, noise calibration, and the expected-cost tradeoff bound.

use qpopf_core::circuit::CircuitConfig;
use qpopf_core::classifier::*;
use qpopf_core::grid::{builtin_case, linearize};
use qpopf_core::mplp::enumerate_regions;
use qpopf_core::privacy::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pairs(count: usize, seed: u64, m: usize) -> AdjacentPairs {
    AdjacentPairs::generate(
        &AdjacencySpec {
            delta_theta: 0.05,
            pair_count: count,
            seed,
        },
        m,
    )
    .unwrap()
}

#[test]
fn adjacent_pairs_are_at_the_requested_distance_inside_the_box() {
    let p = pairs(500, 3, 3);
    for (a, b) in &p.pairs {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((d - 0.05).abs() < 1e-12);
        assert!(a.iter().chain(b).all(|v| (-1.0..=1.0).contains(v)));
    }
    assert_eq!(p, pairs(500, 3, 3));
}

#[test]
fn analytic_bound_dominates_every_audited_pair() {
    let p = pairs(200, 5, 3);
    for (seed, bias) in [(1, false), (2, true)] {
        let model = VqcModel::init(CircuitConfig::new(5, 6, 3).unwrap(), 7, bias, seed).unwrap();
        let states = circuit_states(&model, &p).unwrap();
        for gamma in [0.0, 0.3, 0.7, 1.0] {
            for beta in [0.1, 1.0, 10.0, 100.0] {
                let r = audit_vqc_states(&model, gamma, beta, 0.05, &states).unwrap();
                assert_eq!(r.bound_satisfied, Some(true), "gamma {gamma} beta {beta}");
                let reg = r.eps_reg.unwrap();
                assert!(r.eps_emp.iter().all(|&e| e <= reg));
                if gamma == 1.0 {
                    assert_eq!((r.eps95, reg), (0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn epsilon_falls_with_noise_and_rises_with_beta() {
    let p = pairs(300, 7, 3);
    let model = VqcModel::init(CircuitConfig::new(5, 6, 3).unwrap(), 7, false, 4).unwrap();
    let states = circuit_states(&model, &p).unwrap();
    let gammas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let betas = [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0];
    let grid: Vec<Vec<f64>> = gammas
        .iter()
        .map(|&g| betas.iter().map(|&b| audit_vqc_states(&model, g, b, 0.05, &states).unwrap().eps95).collect())
        .collect();
    for gi in 0..gammas.len() {
        for bi in 0..betas.len() {
            if bi + 1 < betas.len() {
                assert!(grid[gi][bi] <= grid[gi][bi + 1] + 1e-12, "beta trend at {gi},{bi}");
            }
            if gi + 1 < gammas.len() {
                assert!(grid[gi + 1][bi] <= grid[gi][bi] + 1e-12, "gamma trend at {gi},{bi}");
            }
        }
    }
}

#[test]
fn beta_calibration_reaches_the_target() {
    let p = pairs(100, 8, 3);
    let model = VqcModel::init(CircuitConfig::new(5, 6, 3).unwrap(), 7, false, 5).unwrap();
    let states = circuit_states(&model, &p).unwrap();
    for target in [0.1, 0.5, 2.0] {
        let c = calibrate_beta(&model, 0.2, target, 0.05, &states).unwrap();
        assert!((c.eps95 - target).abs() <= 0.005 * target, "{c:?}");
    }
    assert!(calibrate_beta(&model, 1.0, 0.5, 0.05, &states).is_err());
}

fn trained_toy() -> (qpopf_core::grid::ParametricLp, qpopf_core::mplp::RegionAtlas, VqcModel, MlpBaseline) {
    let plp = linearize(&builtin_case("toy2").unwrap().unwrap()).unwrap();
    let atlas = enumerate_regions(&plp, 500, 1).unwrap();
    let ds = Dataset::sample(&atlas, 800, 2).unwrap();
    let tc = TrainConfig {
        epochs: 10,
        ..Default::default()
    };
    let (v, _) = train_vqc(&ds, None, CircuitConfig::new(3, 3, 1).unwrap(), atlas.k(), false, &tc).unwrap();
    let (m, _) = train_mlp(&ds, None, 1, atlas.k(), &MlpConfig::default(), &tc).unwrap();
    (plp, atlas, v, m)
}

#[test]
fn mlp_noise_lowers_epsilon_and_calibrates() {
    let (_, _, _, mlp) = trained_toy();
    let p = pairs(100, 9, 1);
    let sigmas = [0.0, 0.1, 0.3, 1.0, 3.0, 10.0];
    let eps: Vec<f64> = sigmas.iter().map(|&s| audit_mlp(&mlp, s, &p, 400, 3).eps95).collect();
    for w in eps.windows(2) {
        assert!(w[1] <= w[0] * 1.05 + 1e-9, "{eps:?}");
    }
    assert!(eps[5] < 0.2 * eps[0], "{eps:?}");
    let target = 0.5 * eps[0];
    let c = calibrate_sigma(&mlp, target, &p, 400, 3).unwrap();
    assert!((c.eps95 - target).abs() <= 0.05 * target, "{c:?}");
    assert!(c.sigma > 0.0 && c.note.is_none());
}

#[test]
fn expected_cost_excess_respects_the_tradeoff_bound() {
    let (plp, atlas, model, _) = trained_toy();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut audited = 0;
    for i in 0..60 {
        let theta = vec![-0.95 + 1.9 * i as f64 / 59.0];
        let s = model.logits(&theta, 0.0).unwrap();
        for beta in [0.5, 2.0, 8.0] {
            let tb = tradeoff_bound(&s, beta, &atlas, &plp, &theta).unwrap();
            if tb.margin <= 0.0 {
                continue;
            }
            audited += 1;
            let p = softmax_probs(&s, beta);
            let draws = 4000;
            let samples: Vec<f64> = (0..draws).map(|_| tb.delta_j[sample_region(&p, &mut rng) - 1]).collect();
            let mean = samples.iter().sum::<f64>() / draws as f64;
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!(mean <= tb.bound + 3.0 * se + 1e-12, "theta {theta:?} beta {beta}: {mean} > {}", tb.bound);
            assert!(tb.expected_delta_j <= tb.bound + 1e-12);
            assert!(tb.p_err <= tb.mis_selection_bound + 1e-12);
            assert_eq!(tb.delta_j[tb.true_region - 1], 0.0);
        }
    }
    assert!(audited > 50);
}
