use super::GridError;
use crate::matrix::Matrix;
use crate::provenance::sha256_json;
use serde::{Deserialize, Serialize};

/// Tolerance for accepting a physical parameter that sits on the box boundary.
const BOX_TOL: f64 = 1e-9;

/// Physical parameter box. Every LP-level `theta` is the normalized image of this
/// box, i.e. lives in `[-1, 1]^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ThetaBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    /// The normalized box itself.
    pub fn unit(m: usize) -> Self {
        Self::new(vec![-1.0; m], vec![1.0; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn half_width(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    /// Rejects boxes with a zero-width (or inverted) dimension.
    pub fn check_nondegenerate(&self) -> Result<(), GridError> {
        if self.lower.len() != self.upper.len() {
            return Err(GridError::Dimension("theta box bounds differ in length".into()));
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l < u) {
                return Err(GridError::DegenerateTheta { index: i });
            }
        }
        Ok(())
    }
}

/// Maps a physical parameter vector into `[-1, 1]^m`.
pub fn normalize_theta(theta: &[f64], bx: &ThetaBox) -> Result<Vec<f64>, GridError> {
    if theta.len() != bx.dim() {
        return Err(GridError::Dimension(format!(
            "theta has {} components, box has {}",
            theta.len(),
            bx.dim()
        )));
    }
    bx.check_nondegenerate()?;
    theta
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (lo, hi) = (bx.lower[i], bx.upper[i]);
            if !(v >= lo - BOX_TOL && v <= hi + BOX_TOL) {
                return Err(GridError::ThetaOutOfBox {
                    index: i,
                    value: v,
                    lower: lo,
                    upper: hi,
                });
            }
            Ok(2.0 * (v - lo) / (hi - lo) - 1.0)
        })
        .collect()
}

/// Inverse of [`normalize_theta`].
pub fn denormalize_theta(theta: &[f64], bx: &ThetaBox) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(i, &v)| bx.lower[i] + 0.5 * (v + 1.0) * (bx.upper[i] - bx.lower[i]))
        .collect()
}

/// `min c^T x  s.t.  W x <= S + T theta`, with `theta` in normalized units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricLp {
    pub c: Vec<f64>,
    pub w: Matrix,
    pub s: Vec<f64>,
    pub t: Matrix,
    /// Physical range of each parameter (kW for grid cases).
    pub theta_box: ThetaBox,
    pub var_names: Vec<String>,
    pub con_names: Vec<String>,
    /// For rows that encode one side of an equality, the index of the opposing row.
    pub partner: Vec<Option<usize>>,
    /// Variables reported in per-variable error metrics.
    pub tracked: Vec<usize>,
}

impl ParametricLp {
    /// Assembles an LP from raw parts with generated names and no equality pairs.
    pub fn from_parts(c: Vec<f64>, w: Matrix, s: Vec<f64>, t: Matrix, theta_box: ThetaBox) -> Result<Self, GridError> {
        let n = c.len();
        let q = s.len();
        let plp = Self {
            var_names: (0..n).map(|i| format!("x{i}")).collect(),
            con_names: (0..q).map(|i| format!("row{i}")).collect(),
            partner: vec![None; q],
            tracked: (0..n).collect(),
            c,
            w,
            s,
            t,
            theta_box,
        };
        plp.validate()?;
        Ok(plp)
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> usize {
        self.s.len()
    }

    pub fn m(&self) -> usize {
        self.t.cols()
    }

    /// Dimension consistency, finiteness, pair symmetry and a non-degenerate box.
    pub fn validate(&self) -> Result<(), GridError> {
        let (n, q, m) = (self.n(), self.q(), self.m());
        let dim = |msg: String| Err(GridError::Dimension(msg));
        if self.w.rows() != q || self.w.cols() != n {
            return dim(format!("W is {}x{}, expected {q}x{n}", self.w.rows(), self.w.cols()));
        }
        if self.t.rows() != q {
            return dim(format!("T has {} rows, expected {q}", self.t.rows()));
        }
        if self.theta_box.dim() != m || self.theta_box.upper.len() != m {
            return dim(format!("theta box has {} dims, T has {m} columns", self.theta_box.dim()));
        }
        if self.var_names.len() != n || self.con_names.len() != q || self.partner.len() != q {
            return dim("name or partner tables have the wrong length".into());
        }
        if self.tracked.iter().any(|&v| v >= n) {
            return dim("tracked variable index out of range".into());
        }
        if !(self.w.is_finite() && self.t.is_finite() && self.c.iter().chain(&self.s).all(|v| v.is_finite())) {
            return Err(GridError::Invalid("LP data contains non-finite entries".into()));
        }
        for (i, p) in self.partner.iter().enumerate() {
            if let Some(j) = *p {
                if j >= q || self.partner[j] != Some(i) || j == i {
                    return Err(GridError::Invalid(format!("row {i} has an inconsistent partner")));
                }
            }
        }
        self.theta_box.check_nondegenerate()
    }

    /// Right-hand side `S + T theta`.
    pub fn rhs(&self, theta: &[f64]) -> Vec<f64> {
        let mut b = self.s.clone();
        for (i, bi) in b.iter_mut().enumerate() {
            *bi += crate::matrix::dot(self.t.row(i), theta);
        }
        b
    }

    /// Row residuals `S + T theta - W x` (non-negative when feasible).
    pub fn slack(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let b = self.rhs(theta);
        let wx = self.w.mul_vec(x);
        b.iter().zip(&wx).map(|(b, a)| b - a).collect()
    }

    /// Largest constraint violation, zero for feasible points.
    pub fn max_violation(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.slack(x, theta).iter().fold(0.0_f64, |m, s| m.max(-s))
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        crate::matrix::dot(&self.c, x)
    }

    /// Content hash used to tie atlases and checkpoints to the LP they came from.
    pub fn content_hash(&self) -> String {
        sha256_json(self)
    }
}
