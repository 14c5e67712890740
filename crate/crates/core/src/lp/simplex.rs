//! Dense two-phase tableau simplex for `min c^T x  s.t.  A x <= b`, `x` free.
//!
//! The primal has free variables and only inequality rows, so the solver works
//! on the dual standard form
//!
//! ```text
//!     min b^T y   s.t.   A^T y = -c,   y >= 0
//! ```
//!
//! whose tableau has one row per primal variable. An optimal dual basis names
//! `n` primal rows; the primal optimizer is the solution of those rows held at
//! equality. Bland's rule is used throughout, so the pivot sequence (and the
//! returned basis) is a deterministic function of the input.

use super::LpError;
use crate::matrix::Matrix;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const PHASE1_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RawStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub(crate) struct RawSolution {
    pub status: RawStatus,
    pub x: Vec<f64>,
    /// Primal rows forming the optimal basis, sorted ascending.
    pub basis: Vec<usize>,
    /// Dual multipliers `y >= 0` with `A^T y = -c`.
    pub dual: Vec<f64>,
}

impl RawSolution {
    fn failed(status: RawStatus, n: usize, q: usize) -> Self {
        Self {
            status,
            x: vec![f64::NAN; n],
            basis: Vec::new(),
            dual: vec![0.0; q],
        }
    }
}

struct Tableau {
    rows: usize,
    /// Structural columns followed by one artificial per row, then the RHS.
    width: usize,
    data: Vec<f64>,
    /// Reduced-cost row, same width (last entry is minus the objective).
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for (v, p) in self.data[r * w..(r + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.data[r * w + pc] = 0.0;
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule: lowest-index improving column, then the minimum-ratio row
    /// with ties broken by the lowest basic index.
    fn run(&mut self, allowed: usize, pivots: &mut usize, max_pivots: usize) -> Result<bool, LpError> {
        loop {
            let Some(pc) = (0..allowed).find(|&j| self.cost[j] < -COST_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                            if ratio < bratio && !tie || tie && self.basis[r] < self.basis[br] {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = best else {
                return Ok(false);
            };
            self.pivot(pr, pc);
            *pivots += 1;
            if *pivots > max_pivots {
                return Err(LpError::PivotLimit { pivots: *pivots });
            }
        }
    }
}

pub(crate) fn max_pivots_for(n: usize, q: usize) -> usize {
    50 * (n + q) + 1000
}

/// Solves `min c^T x  s.t.  A x <= b`.
pub(crate) fn solve(c: &[f64], a: &Matrix, b: &[f64]) -> Result<RawSolution, LpError> {
    let n = c.len();
    let q = b.len();
    assert_eq!(a.rows(), q);
    assert_eq!(a.cols(), n);
    let max_pivots = max_pivots_for(n, q);

    // Row scaling: each primal row divided by its largest coefficient.
    let mut scale = vec![1.0; q];
    for (i, s) in scale.iter_mut().enumerate() {
        let m = a.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            if b[i] < -PIVOT_TOL {
                return Ok(RawSolution::failed(RawStatus::Infeasible, n, q));
            }
            *s = 0.0;
        } else {
            *s = 1.0 / m;
        }
    }
    if n == 0 {
        return Ok(RawSolution {
            status: RawStatus::Optimal,
            x: Vec::new(),
            basis: Vec::new(),
            dual: vec![0.0; q],
        });
    }

    let width = q + n + 1;
    let mut data = vec![0.0; n * width];
    for i in 0..n {
        let row = &mut data[i * width..(i + 1) * width];
        let sign = if -c[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..q {
            row[j] = sign * a.get(j, i) * scale[j];
        }
        row[q + i] = 1.0;
        row[width - 1] = sign * -c[i];
    }
    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![0.0; width];
    for i in 0..n {
        for j in 0..q {
            cost[j] -= data[i * width + j];
        }
        cost[width - 1] -= data[i * width + width - 1];
    }
    let mut tab = Tableau {
        rows: n,
        width,
        data,
        cost,
        basis: (q..q + n).collect(),
    };
    let mut pivots = 0;
    tab.run(q, &mut pivots, max_pivots)?;
    let infeas = -tab.cost[width - 1];
    let c_scale = 1.0 + c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if infeas > PHASE1_TOL * c_scale {
        // Dual infeasible: the primal is either infeasible or unbounded.
        let status = if primal_feasible(a, b)? {
            RawStatus::Unbounded
        } else {
            RawStatus::Infeasible
        };
        return Ok(RawSolution::failed(status, n, q));
    }
    // Drive remaining artificials out of the basis.
    for r in 0..n {
        if tab.basis[r] >= q {
            if let Some(j) = (0..q).find(|&j| tab.at(r, j).abs() > PIVOT_TOL) {
                tab.pivot(r, j);
                pivots += 1;
            }
        }
    }
    if tab.basis.iter().any(|&j| j >= q) {
        return Err(LpError::RankDeficient);
    }

    // Phase 2 with the scaled dual cost.
    let mut cost = vec![0.0; width];
    for j in 0..q {
        cost[j] = b[j] * scale[j];
    }
    for r in 0..n {
        let cb = cost[tab.basis[r]];
        if cb != 0.0 {
            for j in 0..width {
                cost[j] -= cb * tab.data[r * width + j];
            }
        }
    }
    tab.cost = cost;
    if !tab.run(q, &mut pivots, max_pivots)? {
        // Dual unbounded below: primal infeasible.
        return Ok(RawSolution::failed(RawStatus::Infeasible, n, q));
    }

    let mut dual = vec![0.0; q];
    for r in 0..n {
        let j = tab.basis[r];
        dual[j] = tab.rhs(r).max(0.0) * scale[j];
    }
    let mut basis = tab.basis.clone();
    basis.sort_unstable();
    let x = solve_rows(a, b, &basis)?;
    Ok(RawSolution {
        status: RawStatus::Optimal,
        x,
        basis,
        dual,
    })
}

/// Solves `A_B x = b_B` for a square, nonsingular row selection.
pub(crate) fn solve_rows(a: &Matrix, b: &[f64], rows: &[usize]) -> Result<Vec<f64>, LpError> {
    let ab = a.select_rows(rows).to_nalgebra();
    let bb = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&i| b[i]));
    let x = ab.lu().solve(&bb).ok_or(LpError::Singular)?;
    Ok(x.iter().copied().collect())
}

/// Feasibility of `A x <= b` via `min s  s.t.  A x - s <= b,  -s <= 0`, whose dual
/// is always feasible.
fn primal_feasible(a: &Matrix, b: &[f64]) -> Result<bool, LpError> {
    let (q, n) = (a.rows(), a.cols());
    let mut aux = Matrix::zeros(q + 1, n + 1);
    for i in 0..q {
        aux.row_mut(i)[..n].copy_from_slice(a.row(i));
        aux.set(i, n, -1.0);
    }
    aux.set(q, n, -1.0);
    let mut rhs = b.to_vec();
    rhs.push(0.0);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let sol = solve(&c, &aux, &rhs)?;
    match sol.status {
        RawStatus::Optimal => Ok(sol.x[n] <= 1e-8 * (1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs())))),
        _ => Err(LpError::Numeric("feasibility subproblem did not solve".into())),
    }
}
