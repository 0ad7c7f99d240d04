//! Preconditioned projected gradient descent over the information-slot
//! vector with backtracking line search. Shared by the sum, max-min and
//! proportional solvers; each supplies its own inner solve and gradient.

use crate::error::Result;
use crate::sstm::SolverConfig;

pub(crate) struct Outcome<S> {
    pub tau: Vec<f64>,
    pub state: S,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto `{tau_i >= floor for free i, tau_i = 0 otherwise, sum tau <= 1 - floor}`,
/// which keeps the energy slot open.
pub(crate) fn project(tau: &mut [f64], free: &[bool], floor: f64) {
    let clamped = |shift: f64, t: f64| (t - shift).max(floor);
    let total = |shift: f64| -> f64 { tau.iter().zip(free).filter(|(_, &f)| f).map(|(&t, _)| clamped(shift, t)).sum() };
    let cap = 1.0 - floor;
    let mut shift = 0.0;
    if total(0.0) > cap {
        // total(shift) is nonincreasing; find where it crosses one.
        let (mut lo, mut hi) = (0.0, tau.iter().fold(0.0f64, |m, &t| m.max(t)) + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) > cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shift = hi;
    }
    for (t, &f) in tau.iter_mut().zip(free) {
        *t = if f { clamped(shift, *t) } else { 0.0 };
    }
}

/// Smallest energy-slot share the metric assumes, so it stays nondegenerate
/// when the slots fill the frame.
const SLACK_FLOOR: f64 = 1e-12;

/// `P g` with `P = diag(tau) - tau tau^T / (sum tau + s)`, the metric of the
/// simplex that includes the energy slot `s` as slack. It scales each
/// coordinate by its own length and the total by the remaining slack.
pub(crate) fn precondition(tau: &[f64], g: &[f64]) -> Vec<f64> {
    let total: f64 = tau.iter().sum();
    let tg: f64 = tau.iter().zip(g).map(|(x, d)| x * d).sum::<f64>() / (total + (1.0 - total).max(SLACK_FLOOR));
    tau.iter().zip(g).map(|(x, d)| x * (d - tg)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum-norm point of the convex hull of `gs` in the metric `m`, by
/// Frank-Wolfe with exact line search.
pub(crate) fn min_norm_hull(m: impl Fn(&[f64]) -> Vec<f64>, gs: &[Vec<f64>]) -> Vec<f64> {
    if gs.len() == 1 {
        return gs[0].clone();
    }
    let mut x = gs[0].clone();
    for _ in 0..500 {
        let px = m(&x);
        let (best, _) = gs
            .iter()
            .enumerate()
            .map(|(i, g)| (i, dot(g, &px)))
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        let d: Vec<f64> = gs[best].iter().zip(&x).map(|(a, b)| a - b).collect();
        let pd = m(&d);
        let curvature = dot(&d, &pd);
        let slope = dot(&d, &px);
        if slope >= -1e-15 * dot(&x, &px).max(f64::MIN_POSITIVE) || curvature <= 0.0 {
            break;
        }
        let step = (-slope / curvature).min(1.0);
        x.iter_mut().zip(&d).for_each(|(a, b)| *a += step * b);
    }
    x
}

/// The simplex metric as an explicit matrix.
fn metric_matrix(tau: &[f64]) -> Vec<Vec<f64>> {
    let n = tau.len();
    (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            precondition(tau, &e)
        })
        .collect()
}

fn apply(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    h.iter().map(|row| dot(row, g)).collect()
}

/// BFGS update of the inverse-Hessian approximation `h`; skipped unless the
/// curvature `s . y` is positive.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let sy = dot(s, y);
    if !(sy > 1e-12 * dot(s, s).sqrt() * dot(y, y).sqrt()) {
        return;
    }
    let rho = 1.0 / sy;
    let hy = apply(h, y);
    let yhy = dot(y, &hy);
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

const NEWTON_ALPHA: f64 = 1e-4;

/// Reset the quasi-Newton metric once its predicted decrease drops below
/// this share of the plain gradient's.
const COLLAPSE: f64 = 1e-3;

/// Upper bound on the widening levels tried per iteration.
const MAX_LEVELS: usize = 8;

/// Share of each slot, and of the energy slot, that one model step may remove.
const TO_BOUNDARY: f64 = 0.9;

/// Largest step up to one along `d` that keeps every slot and the energy
/// slot above `1 - TO_BOUNDARY` of its current length. Slots that `d`
/// empties entirely are pinned ones and exempt, as are slots already at the floor.
fn interior_step(tau: &[f64], d: &[f64], floor: f64) -> f64 {
    let mut t: f64 = 1.0;
    for (x, v) in tau.iter().zip(d) {
        if *v < 0.0 && *v != -x && *x > 2.0 * floor {
            t = t.min(TO_BOUNDARY * x / -v);
        }
    }
    let slack = 1.0 - tau.iter().sum::<f64>();
    let grow: f64 = d.iter().sum();
    if grow > 0.0 && slack > 0.0 {
        t = t.min(TO_BOUNDARY * slack / grow);
    }
    t
}

/// Projected Newton direction from a finite-difference Hessian of the
/// gradient on the slots not pinned at the floor; pinned slots are pushed to
/// zero. `None` when a perturbed solve fails or no regularization of the
/// Hessian factors.
fn newton_direction<S>(
    tau: &[f64],
    g: &[f64],
    free: &[bool],
    cfg: &SolverConfig,
    eval: &mut impl FnMut(&[f64]) -> Result<(f64, S)>,
    grad: &mut impl FnMut(&[f64], &S, usize) -> Result<Option<Vec<Vec<f64>>>>,
) -> Option<Vec<f64>> {
    let mut probe: Vec<f64> = tau.iter().zip(g).map(|(t, d)| t - d).collect();
    project(&mut probe, free, cfg.tau_floor);
    let width = probe.iter().zip(tau).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt().min(1e-3);
    let pg = precondition(tau, g);
    let pinned = |i: usize| tau[i] <= cfg.tau_floor + width && pg[i] > 0.0;
    let idx: Vec<usize> = (0..tau.len()).filter(|&i| free[i] && !pinned(i)).collect();
    let n = idx.len();
    let mut h = vec![vec![0.0; n]; n];
    let mut at = |x: &[f64]| -> Option<Vec<f64>> {
        let (_, s) = eval(x).ok()?;
        grad(x, &s, 0).ok()??.into_iter().next()
    };
    for (c, &j) in idx.iter().enumerate() {
        let step = 1e-4 * tau[j];
        let mut plus = tau.to_vec();
        let mut minus = tau.to_vec();
        plus[j] += step;
        minus[j] -= step;
        let (gp, gm) = (at(&plus)?, at(&minus)?);
        for (r, &i) in idx.iter().enumerate() {
            h[r][c] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    for r in 0..n {
        for c in 0..r {
            let m = 0.5 * (h[r][c] + h[c][r]);
            h[r][c] = m;
            h[c][r] = m;
        }
    }
    let rhs: Vec<f64> = idx.iter().map(|&i| -g[i]).collect();
    let scale = (0..n).map(|i| h[i][i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut shift = 0.0;
    let sol = loop {
        if let Some(x) = cholesky_solve(&h, shift, &rhs) {
            break x;
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
        if shift > scale {
            return None;
        }
    };
    let mut dir: Vec<f64> = (0..tau.len()).map(|i| if free[i] && pinned(i) { -tau[i] } else { 0.0 }).collect();
    for (r, &i) in idx.iter().enumerate() {
        dir[i] = sol[r];
    }
    Some(dir)
}

/// Solves `(h + shift I) x = rhs`; `None` unless the shifted matrix is positive definite.
fn cholesky_solve(h: &[Vec<f64>], shift: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut v = h[i][j] + if i == j { shift } else { 0.0 };
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(v > 0.0) {
                    return None;
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = v / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (rhs[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    for i in (0..n).rev() {
        y[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * y[k]).sum::<f64>()) / l[i][i];
    }
    Some(y)
}

/// Accepted candidate: point, loss, state, the subgradient it descended on,
/// and the step length when it came from the plain gradient.
type Move<S> = (Vec<f64>, f64, S, Vec<f64>, Option<f64>);

/// Minimizes `loss(tau)`. `eval` runs the inner solve and returns the loss
/// with whatever state `grad` needs. `grad(tau, state, level)` returns the
/// vertices of an outer approximation of the subdifferential, widening with
/// `level`, or `None` once no wider set exists; smooth losses return their
/// gradient at level 0 and `None` after. Candidates whose inner solve fails
/// are rejected like any other non-decreasing step.
///
/// Every iteration searches along the descent direction of each level and
/// keeps the lowest loss. The loop stops when no level moves the point or
/// the loss by more than `outer_eps`, even along the plain gradient.
pub(crate) fn descend<S>(
    tau_init: Vec<f64>,
    free: &[bool],
    cfg: &SolverConfig,
    mut eval: impl FnMut(&[f64]) -> Result<(f64, S)>,
    mut grad: impl FnMut(&[f64], &S, usize) -> Result<Option<Vec<Vec<f64>>>>,
) -> Result<Outcome<S>> {
    let mut tau = tau_init;
    project(&mut tau, free, cfg.tau_floor);
    let (mut loss, mut state) = eval(&tau)?;
    let mut converged = false;
    let mut iterations = 0;
    let mut h = metric_matrix(&tau);
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut plain = false;
    // Initial trial step of the gradient direction, grown after long steps.
    let mut step = 1.0;

    while iterations < cfg.max_outer_iters {
        let mut sets = Vec::new();
        while sets.len() < MAX_LEVELS {
            match grad(&tau, &state, sets.len())? {
                Some(gs) if !gs.is_empty() => sets.push(gs),
                _ => break,
            }
        }
        if sets.is_empty() {
            break;
        }
        iterations += 1;
        if let Some((t_old, g_old)) = last.take() {
            let sv: Vec<f64> = tau.iter().zip(&t_old).map(|(a, b)| a - b).collect();
            let gv = min_norm_hull(|v| apply(&h, v), &sets[0]);
            let yv: Vec<f64> = gv.iter().zip(&g_old).map(|(a, b)| a - b).collect();
            bfgs_update(&mut h, &sv, &yv);
        }

        let mut best: Option<Move<S>> = None;
        let mut stationary = true;
        for (level, gs) in sets.iter().enumerate() {
            let g = min_norm_hull(|v| precondition(&tau, v), gs);
            let pg = precondition(&tau, &g);
            if dot(&g, &pg) <= cfg.outer_eps * cfg.outer_eps {
                if level == 0 {
                    break;
                }
                continue;
            }
            stationary = false;

            // (direction, subgradient it descends on, initial step, Armijo constant, is the plain gradient)
            let mut dirs = Vec::new();
            if !plain {
                if level == 0 && gs.len() == 1 {
                    if let Some(d) = newton_direction(&tau, &g, free, cfg, &mut eval, &mut grad) {
                        let t0 = interior_step(&tau, &d, cfg.tau_floor);
                        dirs.push((d, g.clone(), t0, NEWTON_ALPHA.min(cfg.armijo_alpha), false));
                    }
                }
                let mut gh = min_norm_hull(|v| apply(&h, v), gs);
                let mut hg: Vec<f64> = apply(&h, &gh).into_iter().map(|v| -v).collect();
                // A metric that predicts far less decrease than the plain one has collapsed.
                if -dot(&gh, &hg) < COLLAPSE * dot(&g, &pg) {
                    h = metric_matrix(&tau);
                    gh = min_norm_hull(|v| apply(&h, v), gs);
                    hg = apply(&h, &gh).into_iter().map(|v| -v).collect();
                }
                if dot(&gh, &hg) < 0.0 {
                    let t0 = interior_step(&tau, &hg, cfg.tau_floor);
                    dirs.push((hg, gh, t0, cfg.armijo_alpha, false));
                }
            }
            dirs.push((pg.iter().map(|v| -v).collect(), g.clone(), step, cfg.armijo_alpha, true));
            'dirs: for (dir, gd, t0, alpha, gradient) in dirs {
                let mut t = t0;
                for _ in 0..cfg.max_backtracks {
                    let mut cand: Vec<f64> = tau.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
                    project(&mut cand, free, cfg.tau_floor);
                    // Sufficient decrease measured along the projection arc.
                    let predicted: f64 = gd.iter().zip(cand.iter().zip(&tau)).map(|(d, (c, x))| d * (c - x)).sum();
                    if predicted < 0.0 {
                        if let Ok((l, s)) = eval(&cand) {
                            if l <= loss + alpha * predicted {
                                if best.as_ref().is_none_or(|b| l < b.1) {
                                    best = Some((cand, l, s, gd, gradient.then_some(t)));
                                }
                                break 'dirs;
                            }
                        }
                    }
                    t *= cfg.backtrack_beta;
                }
            }
        }

        let Some((cand, l, s, gd, on_gradient)) = best else {
            if step > 1.0 {
                step = 1.0;
            } else if plain || stationary {
                converged = true;
                break;
            } else {
                plain = true;
            }
            continue;
        };
        if let Some(t) = on_gradient {
            step = (t * 4.0).clamp(1.0, 1e6);
            // The quasi-Newton metric failed; start it over.
            h = metric_matrix(&cand);
        }
        let dloss = (l - loss).abs();
        let dtau = cand.iter().zip(&tau).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let progressed = dloss > cfg.outer_eps || dtau > cfg.outer_eps;
        last = Some((tau, gd));
        tau = cand;
        loss = l;
        state = s;
        if progressed {
            plain = false;
        } else if plain {
            converged = true;
            break;
        } else {
            // A short step from a model direction gets a plain gradient retry.
            plain = true;
        }
    }
    Ok(Outcome { tau, state, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_euclidean() {
        let mut t = vec![-0.5, 0.7, 0.9, 0.3];
        project(&mut t, &[true, true, true, false], 1e-9);
        assert_eq!(t[3], 0.0);
        assert!((t.iter().sum::<f64>() - (1.0 - 1e-9)).abs() < 1e-12);
        assert_eq!(t[0], 1e-9);
        assert!((t[2] - t[1] - 0.2).abs() < 1e-12);
        let mut inside = vec![0.2, 0.3];
        project(&mut inside, &[true, true], 1e-9);
        assert_eq!(inside, vec![0.2, 0.3]);
    }

    #[test]
    fn min_norm_of_opposed_gradients_vanishes() {
        let tau = [0.3, 0.3];
        let g = min_norm_hull(|v| precondition(&tau, v), &[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
        let g = min_norm_hull(|v| precondition(&tau, v), &[vec![2.0, 0.0]]);
        assert_eq!(g, vec![2.0, 0.0]);
    }

    #[test]
    fn minimizes_separable_quadratic() {
        let cfg = SolverConfig::default();
        let target = [0.2, 0.3];
        let out = descend(
            vec![0.5, 0.1],
            &[true, true],
            &cfg,
            |t| Ok((t.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum(), ())),
            |t, _, level| Ok((level == 0).then(|| vec![t.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect()])),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.tau[0] - 0.2).abs() < 1e-6 && (out.tau[1] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn crosses_a_kink_with_wider_sets() {
        // max(2 t0 - t1, 2 t1 - t0) + (t0 + t1 - 0.6)^2, minimized on the kink at t0 = t1 = 0.175.
        let pieces = |t: &[f64]| [2.0 * t[0] - t[1], 2.0 * t[1] - t[0]];
        let widths = [0.0, 1e-6, 1e-3];
        let out = descend(
            vec![0.5, 0.05],
            &[true, true],
            &SolverConfig::default(),
            |t| {
                let [a, b] = pieces(t);
                Ok((a.max(b) + (t[0] + t[1] - 0.6).powi(2), ()))
            },
            |t, _, level| {
                let Some(&w) = widths.get(level) else { return Ok(None) };
                let [a, b] = pieces(t);
                let q = 2.0 * (t[0] + t[1] - 0.6);
                let mut gs = Vec::new();
                if a >= b - w {
                    gs.push(vec![2.0 + q, -1.0 + q]);
                }
                if b >= a - w {
                    gs.push(vec![-1.0 + q, 2.0 + q]);
                }
                Ok(Some(gs))
            },
        )
        .unwrap();
        assert!(out.converged);
        let t = &out.tau;
        let f = (2.0 * t[0] - t[1]).max(2.0 * t[1] - t[0]) + (t[0] + t[1] - 0.6).powi(2);
        assert!((t[0] - t[1]).abs() < 1e-6, "{t:?}");
        assert!(f - 0.2375 < 1e-7, "{f} at {t:?}");
    }
}
