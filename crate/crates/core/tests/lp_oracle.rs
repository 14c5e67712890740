//! LP engine checked against brute-force vertex enumeration and KKT residuals.

use nalgebra::{DMatrix, DVector};
use qpopf_core::lp::{dual_certificate, solve_dense, LpStatus};
use qpopf_core::matrix::{dot, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Box `|x_i| <= bound` followed by `extra` random rows that keep the origin feasible.
fn random_bounded_lp(n: usize, extra: usize, bound: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Matrix, Vec<f64>) {
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; n];
            r[i] = sign;
            rows.push(r);
            b.push(bound);
        }
    }
    for _ in 0..extra {
        rows.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        b.push(rng.random_range(0.1..1.0));
    }
    let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (c, Matrix::from_rows(&rows, n), b)
}

fn combinations(q: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        out.push(idx.clone());
        let mut i = n;
        while i > 0 && idx[i - 1] == q - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum objective over all basic feasible points.
fn vertex_minimum(c: &[f64], a: &Matrix, b: &[f64]) -> f64 {
    let n = c.len();
    let mut best = f64::INFINITY;
    for rows in combinations(a.rows(), n) {
        let m = DMatrix::from_fn(n, n, |i, j| a.get(rows[i], j));
        let rhs = DVector::from_iterator(n, rows.iter().map(|&r| b[r]));
        let Some(x) = m.lu().solve(&rhs) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let feasible = (0..a.rows()).all(|r| dot(a.row(r), &x) <= b[r] + 1e-9);
        if feasible {
            best = best.min(dot(c, &x));
        }
    }
    best
}

#[test]
fn six_variable_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..8 {
        let (c, a, b) = random_bounded_lp(6, 4, 1.0, &mut rng);
        let sol = solve_dense(&c, &a, &b).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_minimum(&c, &a, &b);
        assert!((sol.objective - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()), "{} vs {oracle}", sol.objective);
    }
}

#[test]
fn random_small_lps_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        // five general rows over three variables, plus a box to keep them bounded
        let (c, a, b) = random_bounded_lp(3, 5, 2.0, &mut rng);
        let sol = solve_dense(&c, &a, &b).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let residual = (0..a.rows()).map(|r| dot(a.row(r), &sol.x) - b[r]).fold(f64::NEG_INFINITY, f64::max);
        assert!(residual <= 1e-9, "primal residual {residual}");
        let (y, dual_obj) = dual_certificate(&sol, &b);
        assert!(y.iter().all(|&v| v >= -1e-12));
        let aty = a.tr_mul_vec(&y);
        for (g, ci) in aty.iter().zip(&c) {
            assert!((g + ci).abs() <= 1e-9, "stationarity residual {}", g + ci);
        }
        assert!((dual_obj - sol.objective).abs() <= 1e-9 * (1.0 + sol.objective.abs()));
        for r in 0..a.rows() {
            let slack = b[r] - dot(a.row(r), &sol.x);
            assert!(y[r] * slack <= 1e-9, "complementary slackness at row {r}");
        }
        assert!(sol.active_set.len() >= 3);
    }
}

#[test]
fn infeasible_and_unbounded_are_reported() {
    // x <= -1 and -x <= -1 (x >= 1)
    let a = Matrix::from_rows(&[vec![1.0], vec![-1.0]], 1);
    assert_eq!(solve_dense(&[1.0], &a, &[-1.0, -1.0]).unwrap().status, LpStatus::Infeasible);
    // min -x s.t. -x <= 0
    let a = Matrix::from_rows(&[vec![-1.0]], 1);
    assert_eq!(solve_dense(&[-1.0], &a, &[0.0]).unwrap().status, LpStatus::Unbounded);
}
