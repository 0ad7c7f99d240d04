//! Reference computations for cross-checking the solvers.
//!
//! Nothing here calls into the blinding or stage-two solvers; only the
//! throughput formulas of [`crate::secrecy`] are shared.
//!
//! * [`simplex_grid_min_max_xi`] brute-forces a blinding row on a grid.
//! * [`cg_solve`] maximizes the sum, min or log-sum objective over the joint
//!   `(E0, tau)` simplex with pairwise Frank-Wolfe steps, and returns a
//!   duality-gap upper bound next to the objective.
//! * [`fd_check`] compares a claimed directional derivative with central
//!   differences on a ladder of step sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ChannelRealization;
use crate::secrecy::{d_energy_partial, d_tau_partial, Problem, EPS_TAU};

/// Brute-force minimizer of the worst eavesdropper slope in slot `i`.
/// Weights live on a grid of step `resolution`; the transmitter's own weight is zero.
pub fn simplex_grid_min_max_xi(
    i: usize,
    channels: &ChannelRealization,
    p_h: f64,
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    let k = channels.num_nodes();
    if !(2..=4).contains(&k) {
        return Err(Error::InvalidArgument(format!("grid search supports 2 to 4 nodes, got {k}")));
    }
    if i >= k {
        return Err(Error::InvalidArgument(format!("slot {i} out of range for {k} nodes")));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!("resolution {resolution} outside (0, 1]")));
    }
    let steps = (1.0 / resolution).round() as usize;
    let others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
    let slope = |j: usize, a: f64| channels.cross_gain(i, j) / (channels.noise_w + channels.mu[j] * a * p_h);

    let mut best = (Vec::new(), f64::INFINITY);
    let mut counts = vec![0usize; others.len()];
    // Enumerate compositions of `steps` into `others.len()` parts.
    loop {
        let used: usize = counts[..others.len() - 1].iter().sum();
        if used <= steps {
            counts[others.len() - 1] = steps - used;
            let xi = others
                .iter()
                .zip(&counts)
                .map(|(&j, &c)| slope(j, c as f64 / steps as f64))
                .fold(0.0, f64::max);
            if xi < best.1 {
                let mut w = vec![0.0; k];
                for (&j, &c) in others.iter().zip(&counts) {
                    w[j] = c as f64 / steps as f64;
                }
                best = (w, xi);
            }
        }
        let mut pos = 0;
        loop {
            if pos + 1 >= others.len() {
                return Ok(best);
            }
            counts[pos] += 1;
            if counts[..=pos].iter().sum::<usize>() <= steps {
                break;
            }
            counts[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CgObjective {
    Sum,
    /// Minimum throughput, handled through a log-sum-exp smoothing.
    Min,
    LogSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub max_iters: usize,
    /// Stop once the duality gap is below this fraction of `|objective|`.
    pub gap_tol: f64,
    /// Final smoothing error `t ln K` as a fraction of the minimum throughput.
    pub smoothing_tol: f64,
    pub line_search_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { max_iters: 10_000, gap_tol: 1e-9, smoothing_tol: 1e-7, line_search_iters: 80 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgResult {
    pub e0: Vec<f64>,
    pub tau: Vec<f64>,
    /// Unsmoothed objective at the returned point.
    pub objective: f64,
    /// Certified upper bound on the optimal objective.
    pub upper_bound: f64,
    pub gap: f64,
    /// `t ln K` of the last smoothing stage; zero for the smooth objectives.
    pub smoothing_bound: f64,
    pub iterations: usize,
}

/// Which coordinates move and how much mass they share.
struct Domain {
    free: Vec<bool>,
    mass: f64,
    fixed_tau: Option<Vec<f64>>,
}

struct Cg<'a> {
    problem: &'a Problem,
    active: Vec<usize>,
    k: usize,
}

impl Cg<'_> {
    fn tau<'b>(&self, z: &'b [f64]) -> &'b [f64] {
        &z[self.k..]
    }

    fn throughputs(&self, z: &[f64]) -> Vec<f64> {
        let tau = self.tau(z);
        self.active.iter().map(|&i| self.problem.throughput(i, z[i], tau)).collect()
    }

    fn value(&self, obj: CgObjective, t: f64, z: &[f64]) -> f64 {
        let d = self.throughputs(z);
        match obj {
            CgObjective::Sum => d.iter().sum(),
            CgObjective::LogSum => d.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).sum(),
            CgObjective::Min => smoothed_min(&d, t),
        }
    }

    /// Gradient of `sum_i w_i D_i` in `z`.
    fn gradient(&self, z: &[f64], weights: &[f64]) -> Vec<f64> {
        let tau = self.tau(z);
        let mut g = vec![0.0; 2 * self.k];
        for (slot, &i) in self.active.iter().enumerate() {
            let w = weights[slot];
            if w == 0.0 {
                continue;
            }
            let n = &self.problem.nodes[i];
            let e = self.problem.energy(i, z[i], tau);
            let t = tau[i].max(2.0 * EPS_TAU);
            let de = d_energy_partial(n.zeta, n.xi, e, t).unwrap_or(0.0) * self.problem.gain(i);
            let dt = d_tau_partial(n.zeta, n.xi, e, t).unwrap_or(0.0);
            g[i] += w * de;
            g[self.k + i] += w * dt;
            for (j, c) in n.harvest_coeffs.iter().enumerate() {
                g[self.k + j] += w * de * c;
            }
        }
        g
    }

    fn weights(&self, obj: CgObjective, t: f64, z: &[f64]) -> Vec<f64> {
        let d = self.throughputs(z);
        match obj {
            CgObjective::Sum => vec![1.0; d.len()],
            CgObjective::LogSum => d.iter().map(|v| 1.0 / v).collect(),
            CgObjective::Min => softmin_weights(&d, t),
        }
    }

    /// Up to `chunk` pairwise Frank-Wolfe steps, stopping early once the gap
    /// drops below `gap_stop`. Returns the last gap and whether it was met.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        obj: CgObjective,
        t: f64,
        dom: &Domain,
        z: &mut [f64],
        budget: &mut usize,
        chunk: usize,
        gap_stop: &impl Fn(f64) -> f64,
        cfg: &CgConfig,
    ) -> (f64, bool) {
        let mut gap = f64::INFINITY;
        for _ in 0..chunk {
            if *budget == 0 {
                break;
            }
            let g = self.gradient(z, &self.weights(obj, t, z));
            let free = (0..z.len()).filter(|&v| dom.free[v]);
            let up = free.clone().max_by(|&a, &b| g[a].total_cmp(&g[b])).expect("no free coordinates");
            // Near-empty coordinates cannot give up enough mass to matter.
            let floor = 1e-12 * dom.mass;
            let down = free
                .clone()
                .filter(|&v| z[v] > floor)
                .min_by(|&a, &b| g[a].total_cmp(&g[b]))
                .or_else(|| free.filter(|&v| z[v] > 0.0).min_by(|&a, &b| g[a].total_cmp(&g[b])))
                .expect("empty support");
            let dot: f64 = (0..z.len()).filter(|&v| dom.free[v]).map(|v| g[v] * z[v]).sum();
            gap = dom.mass * g[up] - dot;
            let value = self.value(obj, t, z);
            if gap <= gap_stop(value) || up == down {
                return (gap, true);
            }
            *budget -= 1;
            let mut max_step = z[down];
            if down >= self.k {
                // Emptying a slot would take its node off the air.
                max_step *= 1.0 - 1e-9;
            }
            let along = |s: f64| {
                let mut y = z.to_vec();
                y[up] += s;
                y[down] -= s;
                self.value(obj, t, &y)
            };
            let step = golden_max(along, max_step, cfg.line_search_iters);
            if step <= 0.0 {
                break;
            }
            z[up] += step;
            z[down] = (z[down] - step).max(0.0);
        }
        (gap, false)
    }

    /// Damped Newton steps on the face spanned by the current support and
    /// the best Frank-Wolfe vertex. The Hessian is a forward difference of
    /// the exact gradient. Returns whether any step was taken.
    fn polish(&self, obj: CgObjective, t: f64, dom: &Domain, z: &mut [f64], budget: &mut usize) -> bool {
        let grad = |z: &[f64]| self.gradient(z, &self.weights(obj, t, z));
        let mut moved = false;
        for _ in 0..20 {
            if *budget == 0 {
                break;
            }
            let g = grad(z);
            let mut face: Vec<usize> = (0..z.len()).filter(|&v| dom.free[v] && z[v] > 0.0).collect();
            if let Some(up) = (0..z.len()).filter(|&v| dom.free[v]).max_by(|&a, &b| g[a].total_cmp(&g[b])) {
                if !face.contains(&up) {
                    face.push(up);
                }
            }
            if face.len() < 2 {
                break;
            }
            let pivot = face.iter().copied().max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
            let rest: Vec<usize> = face.into_iter().filter(|&v| v != pivot).collect();
            let reduced = |g: &[f64]| -> Vec<f64> { rest.iter().map(|&v| g[v] - g[pivot]).collect() };
            let r = reduced(&g);
            let h = 1e-9 * dom.mass;
            let n = rest.len();
            let mut m = vec![vec![0.0; n]; n];
            for (c, &v) in rest.iter().enumerate() {
                let mut y = z.to_vec();
                y[v] += h;
                y[pivot] -= h;
                let rp = reduced(&grad(&y));
                for row in 0..n {
                    m[row][c] = -(rp[row] - r[row]) / h;
                }
            }
            let diag = (0..n).map(|i| m[i][i].abs()).fold(0.0, f64::max);
            for i in 0..n {
                for j in 0..i {
                    let avg = 0.5 * (m[i][j] + m[j][i]);
                    m[i][j] = avg;
                    m[j][i] = avg;
                }
                m[i][i] += 1e-10 * diag + f64::MIN_POSITIVE;
            }
            let Some(delta) = solve_linear(m, r.clone()) else { break };
            if r.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>() <= 0.0 {
                break;
            }
            let mut d = vec![0.0; z.len()];
            for (&v, dv) in rest.iter().zip(&delta) {
                d[v] = *dv;
            }
            d[pivot] = -delta.iter().sum::<f64>();
            let mut s: f64 = 1.0;
            for v in 0..z.len() {
                if d[v] < 0.0 {
                    let room = if v >= self.k { z[v] * (1.0 - 1e-9) } else { z[v] };
                    s = s.min(room / -d[v]);
                }
            }
            let base = self.value(obj, t, z);
            let mut accepted = None;
            while s > 1e-20 {
                let y: Vec<f64> = z.iter().zip(&d).map(|(a, b)| (a + s * b).max(0.0)).collect();
                if self.value(obj, t, &y) > base {
                    accepted = Some(y);
                    break;
                }
                s *= 0.5;
            }
            let Some(y) = accepted else { break };
            z.copy_from_slice(&y);
            *budget -= 1;
            moved = true;
        }
        moved
    }

    /// Alternates Frank-Wolfe sweeps and Newton polishing until the gap
    /// target is met, the budget runs out, or neither makes progress.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &self,
        obj: CgObjective,
        t: f64,
        dom: &Domain,
        z: &mut [f64],
        budget: &mut usize,
        gap_stop: impl Fn(f64) -> f64,
        cfg: &CgConfig,
    ) -> f64 {
        loop {
            let (gap, met) = self.run(obj, t, dom, z, budget, 200, &gap_stop, cfg);
            if met || *budget == 0 {
                return gap;
            }
            if !self.polish(obj, t, dom, z, budget) {
                let (gap, _) = self.run(obj, t, dom, z, budget, 1, &gap_stop, cfg);
                return gap;
            }
        }
    }
}

/// Upper bound on `max min_i D_i` from the linearizations at `z`: for any
/// weights `w` on the simplex, `min_i D_i(z') <= max_v a_v . w` over the
/// vertices `v`, with `a_v = D(z) - grad D(z) z + mass grad D(z)_v`. The best
/// `w` is a small matrix game, solved exactly by vertex enumeration for up
/// to six nodes; `fallback` weights are always tried.
fn min_certificate(cg: &Cg, dom: &Domain, z: &[f64], fallback: &[f64]) -> f64 {
    let m = cg.active.len();
    let d = cg.throughputs(z);
    let free: Vec<usize> = (0..z.len()).filter(|&v| dom.free[v]).collect();
    let grads: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            cg.gradient(z, &e)
        })
        .collect();
    let base: Vec<f64> = (0..m).map(|i| d[i] - free.iter().map(|&v| grads[i][v] * z[v]).sum::<f64>()).collect();
    let payoff: Vec<Vec<f64>> =
        free.iter().map(|&v| (0..m).map(|i| base[i] + dom.mass * grads[i][v]).collect()).collect();
    let bound = |w: &[f64]| -> f64 {
        let mut w: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
        let s: f64 = w.iter().sum();
        if !(s > 0.0) {
            return f64::INFINITY;
        }
        w.iter_mut().for_each(|x| *x /= s);
        payoff.iter().map(|a| a.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best = bound(fallback);
    if m > 6 {
        return best;
    }
    // Unknowns (w, s); rows are either `w_i = 0` or `a_v . w - s = 0`.
    let rows = m + payoff.len();
    let mut chosen = Vec::with_capacity(m);
    enumerate_subsets(rows, m, 0, &mut chosen, &mut |set: &[usize]| {
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (r, &c) in set.iter().enumerate() {
            if c < m {
                a[r][c] = 1.0;
            } else {
                a[r][..m].copy_from_slice(&payoff[c - m]);
                a[r][m] = -1.0;
            }
        }
        a[m][..m].iter_mut().for_each(|x| *x = 1.0);
        b[m] = 1.0;
        if let Some(x) = solve_linear(a, b) {
            if x[..m].iter().all(|&w| w >= -1e-12) {
                best = best.min(bound(&x[..m]));
            }
        }
    });
    best
}

fn enumerate_subsets(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..n {
        if n - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        enumerate_subsets(n, k, i + 1, chosen, f);
        chosen.pop();
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn smoothed_min(d: &[f64], t: f64) -> f64 {
    let m = d.iter().copied().fold(f64::INFINITY, f64::min);
    if t == 0.0 || d.len() == 1 {
        return m;
    }
    m - t * d.iter().map(|v| (-(v - m) / t).exp()).sum::<f64>().ln()
}

fn softmin_weights(d: &[f64], t: f64) -> Vec<f64> {
    let m = d.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = d.iter().map(|v| (-(v - m) / t).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Maximizer of a concave function on `[0, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, hi: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [(0.0, f(0.0)), (mid, f(mid)), (hi, f(hi))];
    candidates.into_iter().fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc }).0
}

fn solve(problem: &Problem, obj: CgObjective, dom: Domain, cfg: &CgConfig) -> Result<CgResult> {
    let k = problem.len();
    let active: Vec<usize> = (0..k).filter(|&i| problem.is_active(i)).collect();
    if active.is_empty() {
        return Err(Error::NoActiveNodes);
    }
    let cg = Cg { problem, active, k };
    let mut free = dom.free.clone();
    for i in 0..k {
        if !problem.is_active(i) {
            free[i] = false;
            free[k + i] = false;
        }
    }
    let dom = Domain { free, ..dom };
    let n_free = dom.free.iter().filter(|&&f| f).count();
    let mut z = vec![0.0; 2 * k];
    if let Some(tau) = &dom.fixed_tau {
        z[k..].copy_from_slice(tau);
    }
    for v in 0..2 * k {
        if dom.free[v] {
            z[v] = dom.mass / n_free as f64;
        }
    }

    let mut budget = cfg.max_iters;
    let log_k = (cg.active.len() as f64).ln();
    let (gap, t) = match obj {
        CgObjective::Sum | CgObjective::LogSum => {
            let gap = cg.stage(obj, 0.0, &dom, &mut z, &mut budget, |f| cfg.gap_tol * f.abs(), cfg);
            (gap, 0.0)
        }
        CgObjective::Min if log_k == 0.0 => {
            let gap = cg.stage(CgObjective::Sum, 0.0, &dom, &mut z, &mut budget, |f| cfg.gap_tol * f.abs(), cfg);
            (gap, 0.0)
        }
        CgObjective::Min => {
            let scale = |z: &[f64]| cg.throughputs(z).into_iter().fold(f64::INFINITY, f64::min).abs();
            let mut t = 0.25 * scale(&z) / log_k;
            loop {
                let last = t * log_k <= cfg.smoothing_tol * scale(&z);
                let stop = if last { cfg.gap_tol } else { 0.1 * t * log_k };
                let gap = cg.stage(obj, t, &dom, &mut z, &mut budget, |f| if last { stop * f.abs() } else { stop }, cfg);
                if last || budget == 0 {
                    break (gap, t);
                }
                t = (0.25 * t).max(cfg.smoothing_tol * scale(&z) / log_k);
            }
        }
    };
    let objective = match obj {
        CgObjective::Min => cg.throughputs(&z).into_iter().fold(f64::INFINITY, f64::min),
        _ => cg.value(obj, 0.0, &z),
    };
    let smoothing_bound = t * log_k;
    let upper_bound = match obj {
        CgObjective::Min if t > 0.0 => {
            let w = softmin_weights(&cg.throughputs(&z), t);
            let smoothed = cg.value(obj, t, &z) + gap + smoothing_bound;
            smoothed.min(min_certificate(&cg, &dom, &z, &w))
        }
        _ => objective + gap,
    };
    Ok(CgResult {
        e0: z[..k].to_vec(),
        tau: z[k..].to_vec(),
        objective,
        upper_bound,
        gap,
        smoothing_bound,
        iterations: cfg.max_iters - budget,
    })
}

/// Maximizes `obj` jointly over `E0` and the information slots with
/// `sum(E0 + tau) = 1`.
pub fn cg_solve(problem: &Problem, obj: CgObjective, cfg: &CgConfig) -> Result<CgResult> {
    let k = problem.len();
    solve(problem, obj, Domain { free: vec![true; 2 * k], mass: 1.0, fixed_tau: None }, cfg)
}

/// Maximizes `obj` over `E0` alone with the slots held at `tau`.
pub fn cg_solve_fixed_tau(problem: &Problem, tau: &[f64], obj: CgObjective, cfg: &CgConfig) -> Result<CgResult> {
    let k = problem.len();
    if tau.len() != k {
        return Err(Error::InvalidArgument(format!("{} slots for {k} nodes", tau.len())));
    }
    let mass = 1.0 - tau.iter().sum::<f64>();
    if !(mass > 0.0) || tau.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("slots leave no room for the energy slot".into()));
    }
    let free = (0..2 * k).map(|v| v < k).collect();
    solve(problem, obj, Domain { free, mass, fixed_tau: Some(tau.to_vec()) }, cfg)
}

pub const DEFAULT_FD_LADDER: [f64; 3] = [1e-4, 1e-5, 1e-6];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    /// `(h, relative error)` per rung.
    pub errors: Vec<(f64, f64)>,
    pub best_h: f64,
    pub best_error: f64,
}

/// Compares `claimed` with central differences of `f` at `x` along `dir`.
pub fn fd_check(f: impl Fn(&[f64]) -> f64, x: &[f64], dir: &[f64], claimed: f64, ladder: &[f64]) -> FdReport {
    let shifted = |h: f64| -> Vec<f64> { x.iter().zip(dir).map(|(a, d)| a + h * d).collect() };
    let scale = claimed.abs().max(1e-300);
    let errors: Vec<(f64, f64)> = ladder
        .iter()
        .map(|&h| {
            let fd = (f(&shifted(h)) - f(&shifted(-h))) / (2.0 * h);
            (h, (fd - claimed).abs() / scale)
        })
        .collect();
    let (best_h, best_error) =
        errors.iter().copied().fold((f64::NAN, f64::INFINITY), |acc, e| if e.1 < acc.1 { e } else { acc });
    FdReport { errors, best_h, best_error }
}

/// Comparison of a solver value against an oracle bracket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// `(oracle - solver) / |oracle|`, signed.
    pub objective_gap: f64,
    /// `(upper_bound - solver) / |oracle|`; negative means the solver beat the bound.
    pub bound_gap: f64,
    pub max_kkt_residual: f64,
    pub witnesses: Vec<String>,
}

impl OracleReport {
    pub fn compare(oracle: &CgResult, solver_objective: f64, kkt_residual: f64) -> Self {
        let scale = oracle.objective.abs().max(1e-300);
        let objective_gap = (oracle.objective - solver_objective) / scale;
        let bound_gap = (oracle.upper_bound - solver_objective) / scale;
        let mut witnesses = Vec::new();
        if bound_gap < 0.0 {
            witnesses.push(format!(
                "solver value {solver_objective} exceeds the certified bound {}",
                oracle.upper_bound
            ));
        }
        Self { objective_gap, bound_gap, max_kkt_residual: kkt_residual, witnesses }
    }

    /// Both one-sided gaps within `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.objective_gap <= tol && self.bound_gap >= -tol && self.max_kkt_residual.is_finite()
    }
}
