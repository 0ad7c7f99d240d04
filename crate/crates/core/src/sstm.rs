//! Stage two of the sum-secrecy solver.
//!
//! For fixed information slots the energy-slot products `E0` follow from a
//! bisection on the budget price `nu`: every node asks for the energy at which
//! its marginal value `B_i` equals `nu`, tops up its artificial-noise harvest
//! from the energy slot, and `nu` moves until the requests fill the frame.
//! The slots themselves are updated by projected gradient descent on the
//! resulting value function.

use serde::{Deserialize, Serialize};

use crate::blinding::BlindingMatrix;
use crate::descent;
use crate::error::{Error, Result};
use crate::report::{Objective, SolveReport};
use crate::scenario::ChannelRealization;
use crate::secrecy::{d_energy_partial, d_tau_partial, Allocation, Problem, EPS_TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientMode {
    /// Chain rule through the artificial-noise harvest of later nodes.
    Full,
    /// Own-slot term only: `-dD_i/dtau_i + nu`.
    PaperSimplified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop the inner bisection once `|Er| <= bisection_eps`.
    pub bisection_eps: f64,
    pub max_bisection_iters: usize,
    /// Outer stop: both `|dL|` and `|d tau|` at or below this.
    pub outer_eps: f64,
    pub max_outer_iters: usize,
    pub max_backtracks: usize,
    pub armijo_alpha: f64,
    pub backtrack_beta: f64,
    pub gradient_mode: GradientMode,
    /// Active slots are never pushed below this during line search.
    pub tau_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bisection_eps: 1e-9,
            max_bisection_iters: 400,
            outer_eps: 1e-6,
            max_outer_iters: 500,
            max_backtracks: 60,
            armijo_alpha: 0.5,
            backtrack_beta: 0.5,
            gradient_mode: GradientMode::Full,
            tau_floor: 1e-9,
        }
    }
}

/// Fixed-slot solution of the energy allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub e0: Vec<f64>,
    pub energy: Vec<f64>,
    pub nu: f64,
    /// `Er = sum(E0 + tau) - 1` at the returned point.
    pub residual: f64,
    pub bisection_iters: usize,
}

/// Stopping tolerance on `|Er|`: `bisection_eps` scaled by the energy-slot
/// share, so the price times the residual stays small when that share is tiny.
pub(crate) fn residual_tolerance(cfg: &SolverConfig, tau_sum: f64) -> f64 {
    cfg.bisection_eps * (1.0 - tau_sum).clamp(0.0, 1.0)
}

pub(crate) fn check_slots(problem: &Problem, tau: &[f64]) -> Result<()> {
    if tau.len() != problem.len() {
        return Err(Error::InvalidArgument(format!(
            "{} slots for {} nodes",
            tau.len(),
            problem.len()
        )));
    }
    if tau.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("slot durations must be non-negative".into()));
    }
    let sum: f64 = tau.iter().sum();
    if sum > 1.0 + 1e-12 {
        return Err(Error::InfeasibleSlots { sum });
    }
    Ok(())
}

/// Energy at which `B_i(E / tau) = nu`, or zero when even the first joule is
/// worth less than `nu`. Rationalized root of
/// `zeta xi x^2 + (zeta + xi) x + 1 - B_i(0)/nu = 0`; stable for `xi = 0`.
fn price_energy(problem: &Problem, i: usize, tau: f64, nu: f64) -> f64 {
    let n = &problem.nodes[i];
    let b0 = problem.gain(i) * (n.zeta - n.xi);
    let q = b0 / nu - 1.0;
    if !(q > 0.0) || tau <= 0.0 {
        return 0.0;
    }
    let s = n.zeta + n.xi;
    let x = 2.0 * q / (s + (s * s + 4.0 * n.zeta * n.xi * q).sqrt());
    tau * x
}

/// Scalar bisection on a monotone residual. `increasing` says whether the
/// residual grows with the argument. Returns the argument with the smallest
/// `|residual|` seen and the iteration count.
pub(crate) fn bisect(
    mut lo: f64,
    mut hi: f64,
    increasing: bool,
    eps: f64,
    max_iters: usize,
    mut residual: impl FnMut(f64) -> f64,
) -> (f64, f64, usize) {
    let mut best = (hi, residual(hi));
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r.abs() < best.1.abs() {
            best = (mid, r);
        }
        if r.abs() <= eps {
            break;
        }
        if (r > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (best.0, best.1, iters)
}

/// Optimal `E0` and budget price `nu` for fixed information slots.
pub fn inner_allocate(tau: &[f64], problem: &Problem, cfg: &SolverConfig) -> Result<InnerSolution> {
    check_slots(problem, tau)?;
    let active = problem.active();
    if !active.iter().any(|&a| a) {
        return Err(Error::NoActiveNodes);
    }
    let tau_sum: f64 = tau.iter().sum();
    let e0_at = |nu: f64| -> Vec<f64> {
        (0..problem.len())
            .map(|i| {
                if !active[i] {
                    return 0.0;
                }
                let want = price_energy(problem, i, tau[i], nu) / problem.gain(i);
                (want - problem.nodes[i].an_harvest(tau)).max(0.0)
            })
            .collect()
    };
    let nu_max = (0..problem.len())
        .filter(|&i| active[i])
        .map(|i| problem.gain(i) * (problem.nodes[i].zeta - problem.nodes[i].xi))
        .fold(0.0, f64::max);
    let (nu, residual, iters) = bisect(0.0, nu_max, false, residual_tolerance(cfg, tau_sum), cfg.max_bisection_iters, |nu| {
        e0_at(nu).iter().sum::<f64>() + tau_sum - 1.0
    });
    let e0 = e0_at(nu);
    let energy = problem.energies(&e0, tau);
    Ok(InnerSolution { e0, energy, nu, residual, bisection_iters: iters })
}

/// Largest relative violation of `B_i = nu` on the support of `E0` and
/// `B_i <= nu` off it, over active nodes with a usable slot.
pub fn inner_kkt_residual(problem: &Problem, tau: &[f64], sol: &InnerSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..problem.len() {
        if !problem.is_active(i) || tau[i] <= EPS_TAU {
            continue;
        }
        let Ok(b) = problem.b_value(i, sol.energy[i], tau[i]) else { continue };
        let r = if sol.e0[i] > 0.0 { (b - sol.nu).abs() / sol.nu } else { ((b - sol.nu) / sol.nu).max(0.0) };
        worst = worst.max(r);
    }
    worst
}

/// Gradient of the Lagrangian in the information slots at a fixed inner
/// solution. `weights` scales each node's throughput term (all ones for the
/// sum objective, `lambda` for the fairness objectives).
pub fn weighted_gradient(
    tau: &[f64],
    energy: &[f64],
    nu: f64,
    problem: &Problem,
    weights: &[f64],
    mode: GradientMode,
) -> Result<Vec<f64>> {
    let k = problem.len();
    let active = problem.active();
    for j in 0..k {
        if active[j] && tau[j] <= EPS_TAU {
            return Err(Error::BoundarySlot { node: j });
        }
    }
    let mut grad = vec![0.0; k];
    for j in 0..k {
        if !active[j] {
            continue;
        }
        let n = &problem.nodes[j];
        let mut g = nu - weights[j] * d_tau_partial(n.zeta, n.xi, energy[j], tau[j])?;
        if mode == GradientMode::Full {
            for i in (j + 1)..k {
                if !active[i] || weights[i] == 0.0 {
                    continue;
                }
                let ni = &problem.nodes[i];
                let coupling = ni.harvest_coeffs[j];
                if coupling == 0.0 {
                    continue;
                }
                let de = d_energy_partial(ni.zeta, ni.xi, energy[i], tau[i])?;
                g -= weights[i] * de * problem.gain(i) * coupling;
            }
        }
        grad[j] = g;
    }
    Ok(grad)
}

/// Gradient of the sum-objective Lagrangian in the information slots.
pub fn gradient_tau(alloc: &Allocation, problem: &Problem, mode: GradientMode) -> Result<Vec<f64>> {
    let ones = vec![1.0; problem.len()];
    weighted_gradient(alloc.info_slots(), &alloc.energy, alloc.nu, problem, &ones, mode)
}

/// `-sum D + nu Er`, the Lagrangian whose slot gradient is [`weighted_gradient`].
pub fn lagrangian(problem: &Problem, tau: &[f64], sol: &InnerSolution) -> f64 {
    -problem.throughputs(&sol.e0, tau).iter().sum::<f64>() + sol.nu * sol.residual
}

/// Loss the outer loop minimizes: the Lagrangian without credit for unspent
/// budget, so an unresolved negative residual never reads as progress.
pub(crate) fn outer_loss(lagrangian: f64, nu: f64, residual: f64) -> f64 {
    lagrangian - nu * residual.min(0.0)
}

pub(crate) fn initial_slots(problem: &Problem) -> (Vec<f64>, Vec<bool>) {
    let k = problem.len();
    let free = problem.active();
    let tau = free.iter().map(|&f| if f { 1.0 / (k + 1) as f64 } else { 0.0 }).collect();
    (tau, free)
}

pub(crate) fn inactive_nodes(problem: &Problem) -> Vec<usize> {
    (0..problem.len()).filter(|&i| !problem.is_active(i)).collect()
}

/// Full stage-two solve on a prepared problem.
pub fn optimize_problem(problem: &Problem, cfg: &SolverConfig) -> Result<(Allocation, SolveReport)> {
    let (tau0, free) = initial_slots(problem);
    if !free.iter().any(|&f| f) {
        return Err(Error::NoActiveNodes);
    }
    let ones = vec![1.0; problem.len()];
    let out = descent::descend(
        tau0,
        &free,
        cfg,
        |tau| {
            let sol = inner_allocate(tau, problem, cfg)?;
            Ok((outer_loss(lagrangian(problem, tau, &sol), sol.nu, sol.residual), sol))
        },
        |tau, sol, level| {
            if level > 0 {
                return Ok(None);
            }
            weighted_gradient(tau, &sol.energy, sol.nu, problem, &ones, cfg.gradient_mode).map(|g| Some(vec![g]))
        },
    )?;

    let sol = out.state;
    let mut alloc = Allocation::from_slots(problem, &out.tau, sol.e0.clone(), sol.nu);
    alloc.energy = sol.energy.clone();
    let per_node: Vec<f64> = problem.throughputs(&sol.e0, &out.tau).into_iter().map(|d| d.max(0.0)).collect();
    let mut notes = Vec::new();
    if !out.converged {
        notes.push(format!("outer loop stopped after {} iterations without converging", out.iterations));
    }
    let weights = alloc.slot0_weights();
    if alloc.tau[0] > EPS_TAU && (weights.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        notes.push(format!("energy-slot weights sum to {}", weights.iter().sum::<f64>()));
    }
    let report = SolveReport {
        objective_kind: Objective::Sstm,
        objective: per_node.iter().sum(),
        per_node,
        iterations: out.iterations,
        converged: out.converged,
        kkt_residual: inner_kkt_residual(problem, &out.tau, &sol),
        budget_residual: alloc.budget_residual(),
        inactive: inactive_nodes(problem),
        notes,
    };
    Ok((alloc, report))
}

/// Maximizes the sum secrecy throughput for the given blinding.
pub fn optimize(
    channels: &ChannelRealization,
    blinding: &BlindingMatrix,
    p_h: f64,
    cfg: &SolverConfig,
) -> Result<(Allocation, SolveReport)> {
    optimize_problem(&Problem::new(channels, blinding, p_h)?, cfg)
}
