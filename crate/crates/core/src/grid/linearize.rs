//! LinDistFlow linearization of a radial case.
//!
//! Decision vector: generator outputs, elastic demands, then one active-power
//! flow per line (positive in the listed `from -> to` direction), all in MW.
//! Reactive flows are fixed by the downstream reactive demand, so the squared
//! voltage at every bus is an affine function of the active flows on its path
//! to the root.

use super::{GridCase, GridError, ParametricLp, ThetaBox};
use crate::matrix::Matrix;
use std::collections::{HashMap, VecDeque};

const KW_TO_MW: f64 = 1e-3;

struct RowBuilder {
    n: usize,
    m: usize,
    w: Vec<Vec<f64>>,
    s: Vec<f64>,
    t: Vec<Vec<f64>>,
    names: Vec<String>,
    partner: Vec<Option<usize>>,
}

impl RowBuilder {
    fn push(&mut self, name: String, w: Vec<f64>, s: f64, t: Vec<f64>) -> usize {
        debug_assert_eq!(w.len(), self.n);
        debug_assert_eq!(t.len(), self.m);
        self.w.push(w);
        self.s.push(s);
        self.t.push(t);
        self.names.push(name);
        self.partner.push(None);
        self.s.len() - 1
    }

    /// `w x = s + t theta` as the two rows `w x <= s + t theta` and `-w x <= -s - t theta`.
    fn push_equality(&mut self, name: &str, w: Vec<f64>, s: f64, t: Vec<f64>) {
        let neg_w = w.iter().map(|v| -v).collect();
        let neg_t = t.iter().map(|v| -v).collect();
        let a = self.push(format!("{name}:le"), w, s, t);
        let b = self.push(format!("{name}:ge"), neg_w, -s, neg_t);
        self.partner[a] = Some(b);
        self.partner[b] = Some(a);
    }

    fn unit(&self, idx: usize, sign: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        v[idx] = sign;
        v
    }
}

/// Builds the parametric LP without checking the parameter box. Zero-width
/// deviation ranges produce all-zero parameter columns.
pub fn assemble(case: &GridCase) -> Result<ParametricLp, GridError> {
    let n_gen = case.generators.len();
    let n_el = case.demands.elastic.len();
    let n_line = case.lines.len();
    let n = n_gen + n_el + n_line;
    let m = case.renewables.len();
    let gen_col = |k: usize| k;
    let el_col = |k: usize| n_gen + k;
    let line_col = |k: usize| n_gen + n_el + k;

    let mut var_names = Vec::with_capacity(n);
    let mut c = vec![0.0; n];
    for (k, g) in case.generators.iter().enumerate() {
        if !(g.p_min_mw.is_finite() && g.p_max_mw.is_finite()) {
            return Err(GridError::UnboundedVariable(format!("pg{k}@{}", g.bus)));
        }
        var_names.push(format!("pg{k}@{}", g.bus));
        c[gen_col(k)] = g.cost;
    }
    for (k, d) in case.demands.elastic.iter().enumerate() {
        if !(d.p_min_mw.is_finite() && d.p_max_mw.is_finite()) {
            return Err(GridError::UnboundedVariable(format!("pd{k}@{}", d.bus)));
        }
        var_names.push(format!("pd{k}@{}", d.bus));
    }
    for l in &case.lines {
        if l.r_pu == 0.0 && l.x_pu == 0.0 {
            return Err(GridError::ZeroImpedance { from: l.from, to: l.to });
        }
        let name = format!("pl{}-{}", l.from, l.to);
        match l.limit_mw {
            Some(lim) if lim.is_finite() => {}
            _ => return Err(GridError::UnboundedVariable(name)),
        }
        var_names.push(name);
    }

    // Orient the tree away from the root.
    let bus_index: HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let nb = case.buses.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb];
    for (k, l) in case.lines.iter().enumerate() {
        let (a, b) = (bus_index[&l.from], bus_index[&l.to]);
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    // parent_line[bus] = (line index, +1 if the line is listed parent -> child)
    let mut parent_line: Vec<Option<(usize, f64)>> = vec![None; nb];
    let mut parent_bus: Vec<Option<usize>> = vec![None; nb];
    let mut order = Vec::with_capacity(nb);
    let mut visited = vec![false; nb];
    let mut queue = VecDeque::from([0usize]);
    visited[0] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(v, k) in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                let sign = if bus_index[&case.lines[k].from] == u { 1.0 } else { -1.0 };
                parent_line[v] = Some((k, sign));
                parent_bus[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    if order.len() != nb {
        return Err(GridError::NonRadial("network is not connected".into()));
    }

    // Downstream reactive demand of every bus (fixed loads only; DG and renewables at unity power factor).
    let mut q_sub = vec![0.0; nb];
    for d in &case.demands.fixed {
        q_sub[bus_index[&d.bus]] += d.q_mvar;
    }
    for &u in order.iter().rev() {
        if let Some(p) = parent_bus[u] {
            q_sub[p] += q_sub[u];
        }
    }

    let mut rows = RowBuilder {
        n,
        m,
        w: Vec::new(),
        s: Vec::new(),
        t: Vec::new(),
        names: Vec::new(),
        partner: Vec::new(),
    };

    // Nodal active-power balance.
    let half: Vec<f64> = case.renewables.iter().map(|r| r.deviation_kw).collect();
    for &bus in &case.buses {
        let mut w = vec![0.0; n];
        for (k, g) in case.generators.iter().enumerate() {
            if g.bus == bus {
                w[gen_col(k)] += 1.0;
            }
        }
        for (k, d) in case.demands.elastic.iter().enumerate() {
            if d.bus == bus {
                w[el_col(k)] -= 1.0;
            }
        }
        for (k, l) in case.lines.iter().enumerate() {
            if l.to == bus {
                w[line_col(k)] += 1.0;
            }
            if l.from == bus {
                w[line_col(k)] -= 1.0;
            }
        }
        let mut s = case.demands.fixed.iter().filter(|d| d.bus == bus).map(|d| d.p_mw).sum::<f64>();
        let mut t = vec![0.0; m];
        for (r, ren) in case.renewables.iter().enumerate() {
            if ren.bus == bus {
                s -= ren.forecast_mw;
                t[r] -= KW_TO_MW * half[r];
            }
        }
        rows.push_equality(&format!("balance@{bus}"), w, s, t);
    }

    for (k, g) in case.generators.iter().enumerate() {
        let (up, lo) = (rows.unit(gen_col(k), 1.0), rows.unit(gen_col(k), -1.0));
        rows.push(format!("pg{k}@{}:max", g.bus), up, g.p_max_mw, vec![0.0; m]);
        rows.push(format!("pg{k}@{}:min", g.bus), lo, -g.p_min_mw, vec![0.0; m]);
    }
    for (k, d) in case.demands.elastic.iter().enumerate() {
        let (up, lo) = (rows.unit(el_col(k), 1.0), rows.unit(el_col(k), -1.0));
        rows.push(format!("pd{k}@{}:max", d.bus), up, d.p_max_mw, vec![0.0; m]);
        rows.push(format!("pd{k}@{}:min", d.bus), lo, -d.p_min_mw, vec![0.0; m]);
    }
    for (k, l) in case.lines.iter().enumerate() {
        let lim = l.limit_mw.unwrap_or_default();
        let (up, lo) = (rows.unit(line_col(k), 1.0), rows.unit(line_col(k), -1.0));
        rows.push(format!("pl{}-{}:fwd", l.from, l.to), up, lim, vec![0.0; m]);
        rows.push(format!("pl{}-{}:rev", l.from, l.to), lo, lim, vec![0.0; m]);
    }

    // Squared-voltage limits: v_j = v_root - 2/base * sum_path (r P + x Q).
    let v = &case.voltage;
    let v_root = v.root_pu * v.root_pu;
    let (v_lo, v_hi) = (v.min_pu * v.min_pu, v.max_pu * v.max_pu);
    let scale = 2.0 / case.base_mva;
    for &u in order.iter().skip(1) {
        let mut w = vec![0.0; n];
        let mut q_drop = 0.0;
        let mut cur = u;
        while let (Some((k, sign)), Some(p)) = (parent_line[cur], parent_bus[cur]) {
            let l = &case.lines[k];
            w[line_col(k)] += scale * l.r_pu * sign;
            q_drop += scale * l.x_pu * q_sub[cur];
            cur = p;
        }
        let bus = case.buses[u];
        let neg = w.iter().map(|x| -x).collect();
        rows.push(format!("vmin@{bus}"), w, v_root - v_lo - q_drop, vec![0.0; m]);
        rows.push(format!("vmax@{bus}"), neg, v_hi - v_root + q_drop, vec![0.0; m]);
    }

    let tracked = (0..n_gen)
        .chain(case.lines.iter().enumerate().filter(|(_, l)| l.monitor).map(|(k, _)| line_col(k)))
        .collect();
    let theta_box = ThetaBox::new(half.iter().map(|h| -h).collect(), half.clone());
    Ok(ParametricLp {
        c,
        w: Matrix::from_rows(&rows.w, n),
        s: rows.s,
        t: Matrix::from_rows(&rows.t, m),
        theta_box,
        var_names,
        con_names: rows.names,
        partner: rows.partner,
        tracked,
    })
}

/// Validates the case and builds its parametric LP. Zero-width parameter ranges
/// are rejected.
pub fn linearize(case: &GridCase) -> Result<ParametricLp, GridError> {
    case.validate()?;
    if case.renewables.is_empty() {
        return Err(GridError::Invalid("case has no renewable units, so no parameters".into()));
    }
    let plp = assemble(case)?;
    plp.validate()?;
    Ok(plp)
}
