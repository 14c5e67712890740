//! Classifier properties: softmax sensitivity, margin contraction under
//! depolarizing noise, training determinism and separable-case accuracy.

use qpopf_core::circuit::CircuitConfig;
use qpopf_core::classifier::*;
use qpopf_core::grid::{builtin_case, linearize};
use qpopf_core::mplp::enumerate_regions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn softmax_log_ratio_is_bounded_by_twice_the_logit_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let k = rng.random_range(2..9);
        let beta = rng.random_range(0.01..20.0);
        let s: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t: Vec<f64> = s.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let shift = s.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (p, q) = (softmax_probs(&s, beta), softmax_probs(&t, beta));
        for (a, b) in p.iter().zip(&q) {
            assert!((a.ln() - b.ln()).abs() <= 2.0 * beta * shift + 1e-12);
        }
    }
}

#[test]
fn bias_free_margins_contract_with_noise() {
    let cfg = CircuitConfig::new(5, 6, 3).unwrap();
    let model = VqcModel::init(cfg, 7, false, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let s0 = model.logits(&theta, 0.0).unwrap();
        let k = argmax_id(&s0);
        let m0 = margin(&s0, k);
        for gamma in [0.1, 0.5, 0.9] {
            let s = model.logits(&theta, gamma).unwrap();
            assert!((margin(&s, k) - (1.0 - gamma) * m0).abs() <= 1e-12);
            assert_eq!(argmax_id(&s), k);
        }
    }
}

fn toy2_data() -> (Dataset, Dataset, usize) {
    let plp = linearize(&builtin_case("toy2").unwrap().unwrap()).unwrap();
    let atlas = enumerate_regions(&plp, 500, 1).unwrap();
    let ds = Dataset::sample(&atlas, 3000, 5).unwrap();
    let (tr, te) = ds.split(0.8);
    (tr, te, atlas.k())
}

#[test]
fn training_is_deterministic_and_zero_epochs_returns_the_initialization() {
    let (tr, _, k) = toy2_data();
    let small = Dataset {
        thetas: tr.thetas[..200].to_vec(),
        labels: tr.labels[..200].to_vec(),
    };
    let tc = TrainConfig {
        epochs: 3,
        seed: 9,
        ..Default::default()
    };
    let cfg = CircuitConfig::new(3, 2, 1).unwrap();
    let (a, la) = train_vqc(&small, None, cfg.clone(), k, false, &tc).unwrap();
    let (b, lb) = train_vqc(&small, None, cfg.clone(), k, false, &tc).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(la, lb);
    let (ma, _) = train_mlp(&small, None, 1, k, &MlpConfig::default(), &tc).unwrap();
    let (mb, _) = train_mlp(&small, None, 1, k, &MlpConfig::default(), &tc).unwrap();
    assert_eq!(serde_json::to_string(&ma).unwrap(), serde_json::to_string(&mb).unwrap());

    let zero = TrainConfig { epochs: 0, ..tc };
    let (z, log) = train_vqc(&small, None, cfg.clone(), k, false, &zero).unwrap();
    assert!(log.is_empty());
    assert_eq!(z, VqcModel::init(cfg, k, false, 9).unwrap());
}

#[test]
fn both_classifiers_separate_the_two_region_case() {
    let (tr, te, k) = toy2_data();
    assert_eq!(k, 2);
    let tc = TrainConfig::default();
    let (v, _) = train_vqc(&tr, Some(&te), CircuitConfig::new(5, 6, 1).unwrap(), k, false, &tc).unwrap();
    let acc = v.accuracy(&te).unwrap();
    assert!(acc >= 0.99, "vqc accuracy {acc}");
    let (m, _) = train_mlp(&tr, Some(&te), 1, k, &MlpConfig::default(), &tc).unwrap();
    assert!(m.accuracy(&te) >= 0.99, "mlp accuracy {}", m.accuracy(&te));
}

#[test]
fn invalid_training_settings_are_rejected() {
    let (tr, _, k) = toy2_data();
    let bad = TrainConfig {
        batch_size: 0,
        ..Default::default()
    };
    assert!(matches!(
        train_vqc(&tr, None, CircuitConfig::new(2, 1, 1).unwrap(), k, false, &bad),
        Err(ClassifierError::Config(_))
    ));
    let mut wrong = tr.clone();
    wrong.labels[0] = 5;
    assert!(matches!(
        train_mlp(&wrong, None, 1, k, &MlpConfig::default(), &TrainConfig::default()),
        Err(ClassifierError::Data(_))
    ));
}
