//! Statevector circuit properties: depolarizing contraction, shift-rule
//! gradients, and the encoding Lipschitz bound.

use qpopf_core::circuit::*;
use qpopf_core::classifier::{cross_entropy, LinearHead};
use qpopf_core::matrix::{norm2, Matrix};
use qpopf_core::privacy::encoding_lipschitz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_params(cfg: &CircuitConfig, rng: &mut ChaCha8Rng) -> VqcParams {
    VqcParams {
        phi: (0..cfg.layers).map(|_| (0..cfg.n_q).map(|_| rng.random_range(-PI..PI)).collect()).collect(),
    }
}

#[test]
fn depolarizing_scales_features_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = StateVector::random(5, &mut rng);
        let h0 = features(&s, 0.0).unwrap();
        for g in 0..=10 {
            let gamma = g as f64 / 10.0;
            let h = features(&s, gamma).unwrap();
            for (a, b) in h.iter().zip(&h0) {
                worst = worst.max((a - (1.0 - gamma) * b).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "max deviation {worst}");
}

#[test]
fn shift_rule_matches_finite_differences_for_a_nonlinear_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
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
            let (l, ds) = cross_entropy(&head.logits(h), 1.5, label);
            (l, head.weights.tr_mul_vec(&ds))
        };
        let g = param_shift_grad(&cfg, &params, &theta, gamma, &loss).unwrap();
        let flat = params.flat();
        let eval = |f: &[f64]| {
            let h = features(&run_circuit(&cfg, &VqcParams::from_flat(&cfg, f), &theta).unwrap(), gamma).unwrap();
            loss(&h).0
        };
        let step = 1e-5;
        for p in 0..flat.len() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[p] += step;
            dn[p] -= step;
            let fd = (eval(&up) - eval(&dn)) / (2.0 * step);
            assert!((g[p] - fd).abs() <= 1e-6, "param {p}: shift {} vs fd {fd}", g[p]);
        }
        // For a loss linear in the features, the literal shifted-loss rule agrees.
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lin = |h: &[f64]| (h.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(), w.clone());
        let chain = param_shift_grad(&cfg, &params, &theta, gamma, &lin).unwrap();
        let direct = param_shift_grad_direct(&cfg, &params, &theta, gamma, &|h: &[f64]| lin(h).0).unwrap();
        for (a, b) in chain.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn trace_distance_respects_encoding_lipschitz_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for scale in [ENCODING_SCALE, PI] {
        let mut cfg = CircuitConfig::new(5, 6, 3).unwrap();
        cfg.scale = scale;
        let l_enc = encoding_lipschitz(&cfg);
        for _ in 0..200 {
            let params = random_params(&cfg, &mut rng);
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(-0.1..0.1)).collect();
            let b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
            let sa = run_circuit(&cfg, &params, &a).unwrap();
            let sb = run_circuit(&cfg, &params, &b).unwrap();
            let td = trace_distance(&sa, &sb);
            assert!(td <= l_enc * norm2(&d) + 1e-12, "{td} > {}", l_enc * norm2(&d));
        }
    }
}

#[test]
fn circuits_preserve_the_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let cfg = CircuitConfig::new(5, 6, 3).unwrap();
    for _ in 0..100 {
        let params = random_params(&cfg, &mut rng);
        let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = run_circuit(&cfg, &params, &theta).unwrap();
        assert!((s.norm() - 1.0).abs() <= 1e-12);
        let h = features(&s, 0.0).unwrap();
        assert!(h.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}
