//! H-representation polyhedra in normalized parameter space.

use crate::lp::{solve_dense, LpError, LpStatus};
use crate::matrix::{dot, norm2, Matrix};
use serde::{Deserialize, Serialize};

/// Rows whose normal is shorter than this are treated as constant constraints.
const ZERO_ROW: f64 = 1e-10;
/// Slack allowed when deciding that a row is implied by the others.
const REDUNDANCY_TOL: f64 = 1e-9;

/// `{ theta : a theta <= b }` with unit-norm rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub a: Matrix,
    pub b: Vec<f64>,
}

/// Outcome of cleaning a raw row set.
pub(crate) enum Cleaned {
    Empty,
    Rows(Vec<(Vec<f64>, f64)>),
}

impl Polyhedron {
    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    /// Every row satisfied within `tol`.
    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        (0..self.n_rows()).all(|i| dot(self.a.row(i), theta) <= self.b[i] + tol)
    }

    /// Largest row violation (zero inside).
    pub fn max_violation(&self, theta: &[f64]) -> f64 {
        (0..self.n_rows()).fold(0.0_f64, |m, i| m.max(dot(self.a.row(i), theta) - self.b[i]))
    }

    /// The unit box `[-1, 1]^m`.
    pub fn unit_box(m: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * m);
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            rows.push((e.clone(), 1.0));
            e[i] = -1.0;
            rows.push((e, 1.0));
        }
        Self::from_pairs(rows, m)
    }

    pub(crate) fn from_pairs(rows: Vec<(Vec<f64>, f64)>, m: usize) -> Self {
        let b = rows.iter().map(|r| r.1).collect();
        let a = Matrix::from_rows(&rows.into_iter().map(|r| r.0).collect::<Vec<_>>(), m);
        Self { a, b }
    }

    /// Maximizes `row . theta` over the polyhedron.
    pub fn support(&self, row: &[f64]) -> Result<Option<f64>, LpError> {
        let c: Vec<f64> = row.iter().map(|v| -v).collect();
        let sol = solve_dense(&c, &self.a, &self.b)?;
        Ok(match sol.status {
            LpStatus::Optimal => Some(-sol.objective),
            _ => None,
        })
    }

    /// Chebyshev center and radius (largest inscribed ball); `None` if empty.
    pub fn chebyshev(&self) -> Result<Option<(Vec<f64>, f64)>, LpError> {
        let (q, m) = (self.n_rows(), self.dim());
        let mut a = Matrix::zeros(q + 1, m + 1);
        let mut b = self.b.clone();
        for i in 0..q {
            let row = self.a.row(i);
            a.row_mut(i)[..m].copy_from_slice(row);
            a.set(i, m, norm2(row));
        }
        // Bound the radius so the LP stays bounded even for unbounded polyhedra.
        a.set(q, m, 1.0);
        b.push(1e6);
        let mut c = vec![0.0; m + 1];
        c[m] = -1.0;
        let sol = solve_dense(&c, &a, &b)?;
        if sol.status != LpStatus::Optimal {
            return Ok(None);
        }
        let r = sol.x[m];
        if r < -REDUNDANCY_TOL {
            return Ok(None);
        }
        Ok(Some((sol.x[..m].to_vec(), r.max(0.0))))
    }
}

/// Drops constant rows (or reports emptiness), normalizes the rest to unit
/// length and merges duplicate normals keeping the tightest offset.
pub(crate) fn clean_rows(rows: Vec<(Vec<f64>, f64)>, empty_tol: f64) -> Cleaned {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(rows.len());
    for (a, b) in rows {
        let nrm = norm2(&a);
        if nrm < ZERO_ROW {
            if b < -empty_tol {
                return Cleaned::Empty;
            }
            continue;
        }
        let a: Vec<f64> = a.iter().map(|v| v / nrm).collect();
        let b = b / nrm;
        match out
            .iter_mut()
            .find(|(o, _)| o.iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-12))
        {
            Some(existing) => existing.1 = existing.1.min(b),
            None => out.push((a, b)),
        }
    }
    Cleaned::Rows(out)
}

/// Removes rows implied by the others, testing rows in order against the
/// currently kept set (each test is one LP maximizing the row's left side).
pub(crate) fn remove_redundant(rows: Vec<(Vec<f64>, f64)>, m: usize) -> Result<Vec<(Vec<f64>, f64)>, LpError> {
    // Cheap prefilter against the unit box: rows whose maximum over the box
    // already satisfies them cannot cut anything (box rows are always present).
    let mut kept: Vec<(Vec<f64>, f64)> = rows
        .into_iter()
        .filter(|(a, b)| {
            let is_box_row = a.iter().filter(|v| **v != 0.0).count() == 1 && a.iter().any(|v| v.abs() == 1.0);
            is_box_row || a.iter().map(|v| v.abs()).sum::<f64>() > *b + REDUNDANCY_TOL
        })
        .collect();
    let mut i = 0;
    while i < kept.len() {
        let (row, bi) = kept[i].clone();
        let others: Vec<(Vec<f64>, f64)> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, r)| r.clone())
            .collect();
        let mut poly = Polyhedron::from_pairs(others, m);
        // Keep the test LP bounded: include the row itself relaxed by one unit.
        poly.a = append_row(&poly.a, &row);
        poly.b.push(bi + 1.0);
        match poly.support(&row)? {
            Some(v) if v <= bi + REDUNDANCY_TOL => {
                kept.remove(i);
            }
            _ => i += 1,
        }
    }
    Ok(kept)
}

fn append_row(a: &Matrix, row: &[f64]) -> Matrix {
    let (r, c) = (a.rows(), a.cols());
    let mut data = a.as_slice().to_vec();
    data.extend_from_slice(row);
    Matrix::from_row_major(r + 1, c, data)
}
