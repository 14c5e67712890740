//! Critical regions of the parametric LP: affine optimizer maps, region
//! polyhedra, sampling-based enumeration and point location.

mod halton;
mod polyhedron;

pub use halton::halton_points;
pub use polyhedron::Polyhedron;

use crate::grid::{ParametricLp, ThetaBox};
use crate::lp::{hyperplane_rows, solve_lp, solve_lp_rhs, LpError, LpStatus};
use crate::matrix::{norm_inf, Matrix};
use crate::provenance::derive_seed;
use polyhedron::{clean_rows, remove_redundant, Cleaned};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

/// Containment tolerance for point location.
pub const LOCATE_TOL: f64 = 1e-9;
/// Residual allowed in `W_A F = T_A`.
const MAP_RESIDUAL_TOL: f64 = 1e-9;
/// Step of the lexicographic right-hand-side perturbation.
const PERTURB_STEP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MplpError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("active set has {found} independent rows, expected {expected}")]
    ActiveSetSize { found: usize, expected: usize },
    #[error("active-set matrix is singular")]
    Singular,
    #[error("critical region is empty: active set never optimal in the parameter box")]
    EmptyRegion,
    #[error("no critical region found: the LP is infeasible at every sample")]
    NoRegions,
    #[error("parameter point {0:?} is not covered by any region")]
    Uncovered(Vec<f64>),
    #[error("unknown region id {0}")]
    UnknownRegion(usize),
    #[error("atlas was built for LP {atlas}, but the given LP hashes to {plp}")]
    HashMismatch { atlas: String, plp: String },
    #[error("atlas file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRegion {
    pub id: usize,
    pub active_set: Vec<usize>,
    /// `n x m` map from normalized parameters to decisions.
    #[serde(rename = "F")]
    pub f_map: Matrix,
    pub f: Vec<f64>,
    pub polyhedron: Polyhedron,
    pub degenerate: bool,
    pub chebyshev_center: Vec<f64>,
    pub chebyshev_radius: f64,
}

impl CriticalRegion {
    /// `F theta + f`.
    pub fn solution(&self, theta: &[f64]) -> Vec<f64> {
        let mut x = self.f_map.mul_vec(theta);
        for (xi, fi) in x.iter_mut().zip(&self.f) {
            *xi += fi;
        }
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasProvenance {
    pub sampling_budget: usize,
    pub seed: u64,
    pub validation_samples: usize,
    /// Samples at which the LP was infeasible.
    pub infeasible_samples: usize,
    /// Samples resolved through the perturbation fallback.
    pub degenerate_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionAtlas {
    pub plp_hash: String,
    pub n: usize,
    pub m: usize,
    pub theta_box: ThetaBox,
    pub regions: Vec<CriticalRegion>,
    /// Fraction of independent uniform samples located in some region.
    pub coverage: f64,
    pub provenance: AtlasProvenance,
}

#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    pub budget: usize,
    pub seed: u64,
    pub validation_samples: usize,
}

impl EnumerateOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            validation_samples: 2000,
        }
    }
}

/// `F = W_A^{-1} T_A`, `f = W_A^{-1} S_A` by LU solves. An equality pair in the
/// active set contributes one row.
pub fn compute_affine_map(plp: &ParametricLp, active_set: &[usize]) -> Result<(Matrix, Vec<f64>), MplpError> {
    let mut sorted = active_set.to_vec();
    sorted.sort_unstable();
    let rows = hyperplane_rows(&sorted, &plp.partner);
    let (n, m) = (plp.n(), plp.m());
    if rows.len() != n {
        return Err(MplpError::ActiveSetSize {
            found: rows.len(),
            expected: n,
        });
    }
    let wa = plp.w.select_rows(&rows).to_nalgebra();
    let lu = wa.clone().lu();
    if !lu.is_invertible() {
        return Err(MplpError::Singular);
    }
    let mut rhs = nalgebra::DMatrix::<f64>::zeros(n, m + 1);
    for (r, &i) in rows.iter().enumerate() {
        for j in 0..m {
            rhs[(r, j)] = plp.t.get(i, j);
        }
        rhs[(r, m)] = plp.s[i];
    }
    let sol = lu.solve(&rhs).ok_or(MplpError::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(MplpError::Singular);
    }
    let resid = (&wa * &sol - &rhs).abs().max();
    let scale = 1.0 + rhs.abs().max();
    if resid > MAP_RESIDUAL_TOL * scale {
        return Err(MplpError::Singular);
    }
    let mut f_map = Matrix::zeros(n, m);
    let mut f = vec![0.0; n];
    for r in 0..n {
        for j in 0..m {
            f_map.set(r, j, sol[(r, j)]);
        }
        f[r] = sol[(r, m)];
    }
    Ok((f_map, f))
}

/// Parameter set on which the affine map satisfies every inactive row,
/// intersected with the unit box and stripped of redundant rows.
pub fn region_polyhedron(
    plp: &ParametricLp,
    active_set: &[usize],
    f_map: &Matrix,
    f: &[f64],
) -> Result<Polyhedron, MplpError> {
    let m = plp.m();
    let in_active: Vec<bool> = {
        let mut v = vec![false; plp.q()];
        for &i in active_set {
            v[i] = true;
        }
        v
    };
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(plp.q() + 2 * m);
    for i in 0..plp.q() {
        let paired_active = plp.partner[i].is_some_and(|j| in_active[j]);
        if in_active[i] || paired_active {
            continue;
        }
        let w = plp.w.row(i);
        // (W_i F - T_i) theta <= S_i - W_i f
        let a: Vec<f64> = (0..m)
            .map(|j| (0..plp.n()).map(|k| w[k] * f_map.get(k, j)).sum::<f64>() - plp.t.get(i, j))
            .collect();
        let b = plp.s[i] - crate::matrix::dot(w, f);
        rows.push((a, b));
    }
    let bx = Polyhedron::unit_box(m);
    for i in 0..bx.n_rows() {
        rows.push((bx.a.row(i).to_vec(), bx.b[i]));
    }
    let rows = match clean_rows(rows, 1e-9) {
        Cleaned::Empty => return Err(MplpError::EmptyRegion),
        Cleaned::Rows(r) => r,
    };
    let full = Polyhedron::from_pairs(rows.clone(), m);
    if full.chebyshev()?.is_none() {
        return Err(MplpError::EmptyRegion);
    }
    let kept = remove_redundant(rows, m)?;
    Ok(Polyhedron::from_pairs(kept, m))
}

/// Active set used for a sample: the LP's own when nondegenerate, otherwise
/// the optimal basis of the lexicographically perturbed LP (with equality
/// partners restored). Returns `None` when the LP is infeasible.
fn sample_active_set(plp: &ParametricLp, theta: &[f64]) -> Result<Option<(Vec<usize>, bool)>, LpError> {
    let sol = solve_lp(plp, theta)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    if !sol.degenerate {
        return Ok(Some((sol.active_set, false)));
    }
    let mut b = plp.rhs(theta);
    for (i, bi) in b.iter_mut().enumerate() {
        *bi += PERTURB_STEP * (i as f64 + 1.0);
    }
    let pert = solve_lp_rhs(plp, &b)?;
    let basis = if pert.status == LpStatus::Optimal {
        pert.basis
    } else {
        sol.basis
    };
    Ok(Some((with_partners(&basis, &plp.partner), true)))
}

fn with_partners(rows: &[usize], partner: &[Option<usize>]) -> Vec<usize> {
    let mut out: Vec<usize> = rows.iter().flat_map(|&i| std::iter::once(i).chain(partner[i])).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Builds a region for an active set, or `None` if it is singular or empty.
fn build_region(plp: &ParametricLp, active_set: Vec<usize>, degenerate: bool) -> Result<Option<CriticalRegion>, MplpError> {
    let (f_map, f) = match compute_affine_map(plp, &active_set) {
        Ok(v) => v,
        Err(MplpError::Singular | MplpError::ActiveSetSize { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let polyhedron = match region_polyhedron(plp, &active_set, &f_map, &f) {
        Ok(p) => p,
        Err(MplpError::EmptyRegion) => return Ok(None),
        Err(e) => return Err(e),
    };
    let Some((center, radius)) = polyhedron.chebyshev()? else {
        return Ok(None);
    };
    Ok(Some(CriticalRegion {
        id: 0,
        active_set,
        f_map,
        f,
        polyhedron,
        degenerate,
        chebyshev_center: center,
        chebyshev_radius: radius,
    }))
}

/// Enumerates regions with the default validation sample count.
pub fn enumerate_regions(plp: &ParametricLp, budget: usize, seed: u64) -> Result<RegionAtlas, MplpError> {
    enumerate_regions_with(plp, &EnumerateOptions::new(budget, seed))
}

/// Samples the parameter box with a shifted Halton sequence, solves the LP at
/// each point (in parallel), and builds one region per distinct active set in
/// order of first appearance.
pub fn enumerate_regions_with(plp: &ParametricLp, opts: &EnumerateOptions) -> Result<RegionAtlas, MplpError> {
    let m = plp.m();
    let samples = halton_points(m, opts.budget, opts.seed);
    let results: Vec<Option<(Vec<usize>, bool)>> = samples
        .par_iter()
        .map(|theta| sample_active_set(plp, theta))
        .collect::<Result<_, _>>()?;

    let infeasible_samples = results.iter().filter(|r| r.is_none()).count();
    let degenerate_samples = results.iter().flatten().filter(|r| r.1).count();
    let mut order: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    for (set, degenerate) in results.into_iter().flatten() {
        match index.get(&set) {
            Some(&k) => {
                // A nondegenerate hit clears the flag of a set first met at a tie.
                if !degenerate {
                    order[k].1 = false;
                }
            }
            None => {
                index.insert(set.clone(), order.len());
                order.push((set, degenerate));
            }
        }
    }
    let built: Vec<Option<CriticalRegion>> = order
        .into_par_iter()
        .map(|(set, deg)| build_region(plp, set, deg))
        .collect::<Result<_, _>>()?;
    let mut regions: Vec<CriticalRegion> = built.into_iter().flatten().collect();
    if regions.is_empty() {
        return Err(MplpError::NoRegions);
    }
    for (k, r) in regions.iter_mut().enumerate() {
        r.id = k + 1;
    }
    let mut atlas = RegionAtlas {
        plp_hash: plp.content_hash(),
        n: plp.n(),
        m,
        theta_box: plp.theta_box.clone(),
        regions,
        coverage: 0.0,
        provenance: AtlasProvenance {
            sampling_budget: opts.budget,
            seed: opts.seed,
            validation_samples: opts.validation_samples,
            infeasible_samples,
            degenerate_samples,
        },
    };
    atlas.coverage = estimate_coverage(&atlas, opts.validation_samples, derive_seed(opts.seed, 1));
    Ok(atlas)
}

/// Fraction of `count` uniform samples (independent of the enumeration
/// samples) that fall in some region.
pub fn estimate_coverage(atlas: &RegionAtlas, count: usize, seed: u64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..count)
        .filter(|_| {
            let theta: Vec<f64> = (0..atlas.m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            locate_region(atlas, &theta).is_ok()
        })
        .count();
    hits as f64 / count as f64
}

/// Smallest region id whose polyhedron contains `theta` within [`LOCATE_TOL`].
pub fn locate_region(atlas: &RegionAtlas, theta: &[f64]) -> Result<usize, MplpError> {
    atlas
        .regions
        .iter()
        .find(|r| r.polyhedron.contains(theta, LOCATE_TOL))
        .map(|r| r.id)
        .ok_or_else(|| MplpError::Uncovered(theta.to_vec()))
}

/// `F_k theta + f_k` for region `k` (no feasibility guarantee).
pub fn reconstruct_solution(atlas: &RegionAtlas, k: usize, theta: &[f64]) -> Result<Vec<f64>, MplpError> {
    Ok(atlas.region(k)?.solution(theta))
}

impl RegionAtlas {
    pub fn k(&self) -> usize {
        self.regions.len()
    }

    pub fn region(&self, k: usize) -> Result<&CriticalRegion, MplpError> {
        if k == 0 || k > self.regions.len() {
            return Err(MplpError::UnknownRegion(k));
        }
        Ok(&self.regions[k - 1])
    }

    pub fn degenerate_count(&self) -> usize {
        self.regions.iter().filter(|r| r.degenerate).count()
    }

    /// Fails unless the atlas was built from this LP.
    pub fn check_plp(&self, plp: &ParametricLp) -> Result<(), MplpError> {
        let h = plp.content_hash();
        if h != self.plp_hash {
            return Err(MplpError::HashMismatch {
                atlas: self.plp_hash.clone(),
                plp: h,
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), MplpError> {
        let io = |e: String| MplpError::Io {
            path: path.display().to_string(),
            message: e,
        };
        let text = serde_json::to_string_pretty(self).map_err(|e| io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MplpError> {
        let io = |e: String| MplpError::Io {
            path: path.display().to_string(),
            message: e,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }
}

/// Largest deviation between region maps and fresh LP solves over the given
/// points, in objective value: used as a consistency diagnostic.
pub fn max_objective_error(atlas: &RegionAtlas, plp: &ParametricLp, thetas: &[Vec<f64>]) -> Result<f64, MplpError> {
    let errs: Vec<f64> = thetas
        .par_iter()
        .map(|theta| -> Result<f64, MplpError> {
            let k = locate_region(atlas, theta)?;
            let x = reconstruct_solution(atlas, k, theta)?;
            let sol = solve_lp(plp, theta)?;
            Ok((plp.objective(&x) - sol.objective).abs())
        })
        .collect::<Result<_, _>>()?;
    Ok(norm_inf(&errs))
}
