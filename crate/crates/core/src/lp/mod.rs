//! LP solving with active-set extraction and feasibility projection.

mod simplex;

use crate::grid::ParametricLp;
use crate::matrix::{dot, Matrix};
use serde::{Deserialize, Serialize};
use simplex::RawStatus;
use thiserror::Error;

/// Rowwise feasibility tolerance.
pub const TOL_FEAS: f64 = 1e-8;
/// Residual below which a row counts as active.
pub const TOL_ACTIVE: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("simplex exceeded the pivot limit ({pivots} pivots)")]
    PivotLimit { pivots: usize },
    #[error("constraint matrix has dependent columns; the optimizer is not a vertex")]
    RankDeficient,
    #[error("basis matrix is singular")]
    Singular,
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("feasible set is empty at the given parameter")]
    InfeasibleSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Rows with residual at most [`TOL_ACTIVE`], ascending.
    pub active_set: Vec<usize>,
    pub status: LpStatus,
    /// More than `n` distinct hyperplanes are active (an equality pair counts once).
    pub degenerate: bool,
    /// Rows of the optimal simplex basis (`n` of them), ascending.
    pub basis: Vec<usize>,
    /// Dual multipliers `y >= 0` with `W^T y = -c`; zero off the basis.
    pub duals: Vec<f64>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `min c^T x  s.t.  A x <= b` with `x` free. Rows are treated as
/// independent hyperplanes for the degeneracy flag.
pub fn solve_dense(c: &[f64], a: &Matrix, b: &[f64]) -> Result<LpSolution, LpError> {
    solve_with_partners(c, a, b, None)
}

/// Solves the parametric LP at a normalized parameter `theta`.
pub fn solve_lp(plp: &ParametricLp, theta: &[f64]) -> Result<LpSolution, LpError> {
    if theta.len() != plp.m() {
        return Err(LpError::Dimension(format!(
            "theta has {} components, LP expects {}",
            theta.len(),
            plp.m()
        )));
    }
    let b = plp.rhs(theta);
    solve_with_partners(&plp.c, &plp.w, &b, Some(&plp.partner))
}

/// Solves the parametric LP with an explicitly supplied right-hand side
/// (used for perturbed solves).
pub fn solve_lp_rhs(plp: &ParametricLp, b: &[f64]) -> Result<LpSolution, LpError> {
    solve_with_partners(&plp.c, &plp.w, b, Some(&plp.partner))
}

fn solve_with_partners(
    c: &[f64],
    a: &Matrix,
    b: &[f64],
    partner: Option<&[Option<usize>]>,
) -> Result<LpSolution, LpError> {
    if a.rows() != b.len() || a.cols() != c.len() {
        return Err(LpError::Dimension(format!(
            "A is {}x{}, b has {}, c has {}",
            a.rows(),
            a.cols(),
            b.len(),
            c.len()
        )));
    }
    let raw = simplex::solve(c, a, b)?;
    let status = match raw.status {
        RawStatus::Optimal => LpStatus::Optimal,
        RawStatus::Infeasible => LpStatus::Infeasible,
        RawStatus::Unbounded => LpStatus::Unbounded,
    };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            x: raw.x,
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            active_set: Vec::new(),
            status,
            degenerate: false,
            basis: Vec::new(),
            duals: raw.dual,
        });
    }
    if raw.x.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Numeric("non-finite primal solution".into()));
    }
    let active = active_rows(a, b, &raw.x, TOL_ACTIVE);
    let degenerate = count_hyperplanes(&active, partner) > c.len();
    Ok(LpSolution {
        objective: dot(c, &raw.x),
        x: raw.x,
        active_set: active,
        status,
        degenerate,
        basis: raw.basis,
        duals: raw.dual,
    })
}

fn active_rows(a: &Matrix, b: &[f64], x: &[f64], tol: f64) -> Vec<usize> {
    (0..a.rows())
        .filter(|&i| (b[i] - dot(a.row(i), x)).abs() <= tol)
        .collect()
}

/// Number of distinct hyperplanes in a row set, counting an equality pair once.
pub fn count_hyperplanes(rows: &[usize], partner: Option<&[Option<usize>]>) -> usize {
    match partner {
        None => rows.len(),
        Some(p) => rows
            .iter()
            .filter(|&&i| match p[i] {
                Some(j) => !(j < i && rows.binary_search(&j).is_ok()),
                None => true,
            })
            .count(),
    }
}

/// Reduces a sorted row set to one row per hyperplane (the lower index of each pair).
pub fn hyperplane_rows(rows: &[usize], partner: &[Option<usize>]) -> Vec<usize> {
    rows.iter()
        .copied()
        .filter(|&i| match partner[i] {
            Some(j) => !(j < i && rows.binary_search(&j).is_ok()),
            None => true,
        })
        .collect()
}

/// Rows of the parametric LP whose residual at `(x, theta)` is at most `tol_active`.
pub fn active_set(solution: &LpSolution, plp: &ParametricLp, theta: &[f64], tol_active: f64) -> Vec<usize> {
    let b = plp.rhs(theta);
    active_rows(&plp.w, &b, &solution.x, tol_active)
}

/// Dual certificate of an optimal solution: returns `(y, dual_objective)` where
/// `y >= 0`, `W^T y = -c` and `-b^T y` equals the primal objective.
pub fn dual_certificate(solution: &LpSolution, b: &[f64]) -> (Vec<f64>, f64) {
    let y = solution.duals.clone();
    let obj = -dot(&y, b);
    (y, obj)
}

/// L1 projection of `x_tilde` onto `{x : W x <= S + T theta}`.
///
/// Solves `min sum t  s.t.  W x <= b,  x - t <= x~,  -x - t <= -x~` over `(x, t)`.
/// Points already feasible within [`TOL_FEAS`] are returned unchanged.
pub fn project_feasible(x_tilde: &[f64], plp: &ParametricLp, theta: &[f64]) -> Result<Vec<f64>, LpError> {
    let b = plp.rhs(theta);
    project_onto(x_tilde, &plp.w, &b)
}

/// Minimum L1 distance from `x_tilde` to `{x : A x <= b}` together with the
/// projected point.
pub fn project_onto(x_tilde: &[f64], a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LpError> {
    let n = x_tilde.len();
    if a.cols() != n {
        return Err(LpError::Dimension(format!("point has {n} entries, A has {} columns", a.cols())));
    }
    let ax = a.mul_vec(x_tilde);
    if ax.iter().zip(b).all(|(l, r)| l - r <= TOL_FEAS) {
        return Ok(x_tilde.to_vec());
    }
    let q = a.rows();
    let mut aux = Matrix::zeros(q + 2 * n, 2 * n);
    let mut rhs = Vec::with_capacity(q + 2 * n);
    for i in 0..q {
        aux.row_mut(i)[..n].copy_from_slice(a.row(i));
        rhs.push(b[i]);
    }
    for j in 0..n {
        aux.set(q + 2 * j, j, 1.0);
        aux.set(q + 2 * j, n + j, -1.0);
        rhs.push(x_tilde[j]);
        aux.set(q + 2 * j + 1, j, -1.0);
        aux.set(q + 2 * j + 1, n + j, -1.0);
        rhs.push(-x_tilde[j]);
    }
    let mut c = vec![0.0; 2 * n];
    c[n..].fill(1.0);
    let sol = simplex::solve(&c, &aux, &rhs)?;
    match sol.status {
        RawStatus::Optimal => Ok(sol.x[..n].to_vec()),
        RawStatus::Infeasible => Err(LpError::InfeasibleSet),
        RawStatus::Unbounded => Err(LpError::Numeric("projection LP reported unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ThetaBox;

    /// min x  s.t.  -x <= -theta,  -x <= 0,  x <= 1.
    pub(crate) fn toy() -> ParametricLp {
        ParametricLp::from_parts(
            vec![1.0],
            Matrix::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0]], 1),
            vec![0.0, 0.0, 1.0],
            Matrix::from_rows(&[vec![-1.0], vec![0.0], vec![0.0]], 1),
            ThetaBox::new(vec![-1.0], vec![1.0]),
        )
        .unwrap()
    }

    #[test]
    fn toy_positive_theta() {
        let s = solve_lp(&toy(), &[0.5]).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 0.5).abs() < 1e-12);
        assert_eq!(s.active_set, vec![0]);
        assert!(!s.degenerate);
    }

    #[test]
    fn toy_negative_theta() {
        let s = solve_lp(&toy(), &[-0.5]).unwrap();
        assert!(s.x[0].abs() < 1e-12);
        assert_eq!(s.active_set, vec![1]);
    }

    #[test]
    fn toy_tie_point_is_degenerate() {
        let plp = toy();
        let s = solve_lp(&plp, &[0.0]).unwrap();
        assert_eq!(s.active_set, vec![0, 1]);
        assert!(s.degenerate);
        assert_eq!(active_set(&s, &plp, &[0.0], TOL_ACTIVE), vec![0, 1]);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x <= -1, -x <= -1
        let a = Matrix::from_rows(&[vec![1.0], vec![-1.0]], 1);
        let s = solve_dense(&[1.0], &a, &[-1.0, -1.0]).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        // min -x s.t. -x <= 0
        let a = Matrix::from_rows(&[vec![-1.0]], 1);
        let s = solve_dense(&[-1.0], &a, &[0.0]).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        // min x s.t. x <= 1 (unbounded below)
        let a = Matrix::from_rows(&[vec![1.0]], 1);
        let s = solve_dense(&[1.0], &a, &[1.0]).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn dual_certificate_matches_objective() {
        let plp = toy();
        let theta = [0.3];
        let s = solve_lp(&plp, &theta).unwrap();
        let b = plp.rhs(&theta);
        let (y, dobj) = dual_certificate(&s, &b);
        assert!(y.iter().all(|&v| v >= 0.0));
        let wty = plp.w.tr_mul_vec(&y);
        assert!((wty[0] + plp.c[0]).abs() < 1e-12);
        assert!((dobj - s.objective).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let plp = toy();
        assert_eq!(project_feasible(&[0.7], &plp, &[0.5]).unwrap(), vec![0.7]);
        let p = project_feasible(&[2.0], &plp, &[0.5]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let p2 = project_feasible(&p, &plp, &[0.5]).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn hyperplane_counting_merges_pairs() {
        let partner = vec![Some(1), Some(0), None];
        assert_eq!(count_hyperplanes(&[0, 1, 2], Some(&partner)), 2);
        assert_eq!(count_hyperplanes(&[1, 2], Some(&partner)), 2);
        assert_eq!(hyperplane_rows(&[0, 1, 2], &partner), vec![0, 2]);
        assert_eq!(count_hyperplanes(&[0, 1, 2], None), 3);
    }
}
