//! Max-min (MMF) and proportional (PLF) fair variants of stage two.
//!
//! MMF bisects the common throughput target `phi`: each node needs the energy
//! that lifts its throughput to `phi`, nodes already above it from the
//! artificial-noise harvest drop out, and `phi` grows until the energy slot
//! is exhausted. PLF bisects the budget price `nu`; each node's energy solves
//! `B_i(E) = nu D_i(E)`, a one-dimensional monotone root.
//!
//! Both reuse stage-one blinding and the projected gradient loop of the sum
//! solver with the throughput terms weighted by the dual multipliers.

use serde::{Deserialize, Serialize};

use crate::blinding::BlindingMatrix;
use crate::descent;
use crate::error::{Error, Result};
use crate::report::{Objective, SolveReport};
use crate::scenario::ChannelRealization;
use crate::secrecy::{secrecy_throughput, Allocation, Problem, EPS_TAU};
use crate::sstm::{bisect, check_slots, inactive_nodes, initial_slots, outer_loss, residual_tolerance, weighted_gradient, SolverConfig};

/// Throughput targets are kept below `phi_max (1 - PHI_GUARD)` so the energy
/// denominator stays positive.
pub const PHI_GUARD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmfState {
    /// Common minimum throughput, nats.
    pub phi: f64,
    /// Nodes that draw on the energy slot; their throughput equals `phi`.
    pub active_set: Vec<usize>,
    pub lambda: Vec<f64>,
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlfState {
    /// Per-node throughput slack, equal to the throughput at the solution.
    pub psi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairSolution<S> {
    pub e0: Vec<f64>,
    pub energy: Vec<f64>,
    pub state: S,
    /// `Er = sum(E0 + tau) - 1`.
    pub residual: f64,
    pub bisection_iters: usize,
}

pub type MmfSolution = FairSolution<MmfState>;
pub type PlfSolution = FairSolution<PlfState>;

fn considered_nodes(problem: &Problem, tau: &[f64]) -> Result<Vec<usize>> {
    check_slots(problem, tau)?;
    let nodes: Vec<usize> = (0..problem.len()).filter(|&i| problem.is_active(i)).collect();
    if nodes.is_empty() {
        return Err(Error::NoActiveNodes);
    }
    if let Some(&i) = nodes.iter().find(|&&i| tau[i] <= EPS_TAU) {
        return Err(Error::BoundarySlot { node: i });
    }
    Ok(nodes)
}

/// Throughput ceiling `tau (ln zeta - ln xi)` of one node; infinite when `xi = 0`.
fn phi_ceiling(problem: &Problem, i: usize, tau: f64) -> f64 {
    let n = &problem.nodes[i];
    if n.xi > 0.0 {
        tau * (n.zeta.ln() - n.xi.ln())
    } else {
        f64::INFINITY
    }
}

/// Energy that gives node `i` throughput exactly `phi` in a slot of length `tau`.
pub fn mmf_energy(problem: &Problem, i: usize, tau: f64, phi: f64) -> f64 {
    let n = &problem.nodes[i];
    if phi <= 0.0 {
        return 0.0;
    }
    if phi >= phi_ceiling(problem, i, tau) {
        return f64::INFINITY;
    }
    let growth = (phi / tau).exp();
    let denom = n.zeta - n.xi * growth;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    tau * (phi / tau).exp_m1() / denom
}

/// Optimal `E0`, common throughput `phi` and multipliers for fixed slots.
pub fn mmf_inner(tau: &[f64], problem: &Problem, cfg: &SolverConfig) -> Result<MmfSolution> {
    let nodes = considered_nodes(problem, tau)?;
    let tau_sum: f64 = tau.iter().sum();
    let (bottleneck, phi_max) = nodes
        .iter()
        .map(|&i| (i, phi_ceiling(problem, i, tau[i])))
        .fold((nodes[0], f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if !(phi_max > 0.0) {
        return Err(Error::MmfInfeasible { node: bottleneck });
    }

    let desired = |phi: f64, i: usize| mmf_energy(problem, i, tau[i], phi) / problem.gain(i) - problem.nodes[i].an_harvest(tau);
    let residual = |phi: f64| -> f64 {
        nodes.iter().map(|&i| desired(phi, i).max(0.0)).sum::<f64>() + tau_sum - 1.0
    };

    let hi = if phi_max.is_finite() {
        phi_max * (1.0 - PHI_GUARD)
    } else {
        // Only eavesdropper-free nodes: grow the target until the budget breaks.
        let mut hi = nodes.iter().map(|&i| tau[i]).fold(f64::INFINITY, f64::min);
        for _ in 0..2000 {
            if residual(hi) > 0.0 {
                break;
            }
            hi *= 2.0;
        }
        hi
    };
    let (phi, res, iters) = bisect(0.0, hi, true, residual_tolerance(cfg, tau_sum), cfg.max_bisection_iters, residual);

    let mut e0 = vec![0.0; problem.len()];
    let mut active_set = Vec::new();
    for &i in &nodes {
        let want = desired(phi, i);
        if want > 0.0 {
            e0[i] = want;
            active_set.push(i);
        }
    }
    let energy = problem.energies(&e0, tau);

    let mut lambda = vec![0.0; problem.len()];
    let nu;
    if phi_max.is_finite() && residual(hi) < 0.0 {
        // The bottleneck's rate ceiling binds before the budget does.
        lambda[bottleneck] = 1.0;
        nu = 0.0;
    } else if active_set.is_empty() {
        // Nobody draws on the energy slot: the weakest node carries the whole multiplier.
        let weakest = nodes
            .iter()
            .copied()
            .min_by(|&a, &b| {
                problem.throughput(a, e0[a], tau).total_cmp(&problem.throughput(b, e0[b], tau))
            })
            .unwrap_or(nodes[0]);
        lambda[weakest] = 1.0;
        nu = 0.0;
    } else {
        let b: Vec<f64> = active_set
            .iter()
            .map(|&i| problem.b_value(i, energy[i], tau[i]))
            .collect::<Result<_>>()?;
        nu = 1.0 / b.iter().map(|v| 1.0 / v).sum::<f64>();
        for (&i, bi) in active_set.iter().zip(&b) {
            lambda[i] = nu / bi;
        }
    }
    Ok(FairSolution {
        e0,
        energy,
        state: MmfState { phi, active_set, lambda, nu },
        residual: res,
        bisection_iters: iters,
    })
}

/// Largest deviation from the max-min certificate, relative to `phi`:
/// nodes in the active set sit at `phi`, the others are at or above it
/// with `E0 = 0`, and the multipliers sum to one.
pub fn mmf_certificate(problem: &Problem, tau: &[f64], sol: &MmfSolution) -> f64 {
    let phi = sol.state.phi;
    let scale = phi.abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in (0..problem.len()).filter(|&i| problem.is_active(i)) {
        let d = problem.throughput(i, sol.e0[i], tau);
        if sol.state.active_set.contains(&i) {
            worst = worst.max((d - phi).abs() / scale);
        } else {
            worst = worst.max((phi - d).max(0.0) / scale);
            worst = worst.max(sol.e0[i]);
        }
    }
    worst.max((sol.state.lambda.iter().sum::<f64>() - 1.0).abs())
}

/// Unique root of `D_i(E) - B_i(E) / nu` in `E`, the energy a proportional-fair
/// allocation gives node `i` at price `nu`.
pub fn plf_root(problem: &Problem, i: usize, tau: f64, nu: f64) -> Result<f64> {
    let n = &problem.nodes[i];
    if !(nu > 0.0) || tau <= EPS_TAU || !problem.is_active(i) {
        return Err(Error::InvalidArgument(format!(
            "proportional root needs nu > 0, a usable slot and a positive slope (node {i})"
        )));
    }
    let gain = problem.gain(i);
    // Both terms of f(E) = D - B/nu, so convergence is judged relative to their size.
    let terms = |e: f64| -> (f64, f64) {
        let x = e / tau;
        let d = secrecy_throughput(n.zeta, n.xi, e, tau);
        let b = gain * (n.zeta - n.xi) / ((1.0 + n.zeta * x) * (1.0 + n.xi * x));
        (d, b / nu)
    };
    let mut lo = 0.0;
    let mut hi = tau / n.zeta;
    for _ in 0..4000 {
        let (d, p) = terms(hi);
        if d > p {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut mid = hi;
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (d, p) = terms(mid);
        if (d - p).abs() <= 1e-12 * p.max(d) {
            break;
        }
        if d > p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// Geometric bisection for a residual that decreases in a positive argument.
fn bisect_decreasing_log(
    mut lo: f64,
    mut hi: f64,
    eps: f64,
    max_iters: usize,
    mut residual: impl FnMut(f64) -> f64,
) -> (f64, f64, usize) {
    let mut best = (hi, residual(hi));
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        let mid = (lo * hi).sqrt();
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
        if r < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (best.0, best.1, iters)
}

/// Optimal `E0`, slacks and multipliers of the proportional-fair problem for fixed slots.
pub fn plf_inner(tau: &[f64], problem: &Problem, cfg: &SolverConfig) -> Result<PlfSolution> {
    let nodes = considered_nodes(problem, tau)?;
    let tau_sum: f64 = tau.iter().sum();
    let e0_at = |nu: f64| -> Result<Vec<f64>> {
        let mut e0 = vec![0.0; problem.len()];
        for &i in &nodes {
            let e = plf_root(problem, i, tau[i], nu)?;
            e0[i] = (e / problem.gain(i) - problem.nodes[i].an_harvest(tau)).max(0.0);
        }
        Ok(e0)
    };
    let residual = |nu: f64| -> f64 {
        match e0_at(nu) {
            Ok(e0) => e0.iter().sum::<f64>() + tau_sum - 1.0,
            Err(_) => f64::NAN,
        }
    };
    let b0 = nodes
        .iter()
        .map(|&i| problem.gain(i) * (problem.nodes[i].zeta - problem.nodes[i].xi))
        .fold(0.0, f64::max);
    let mut nu_min = 1e-12 * b0;
    for _ in 0..2000 {
        if residual(nu_min) > 0.0 {
            break;
        }
        nu_min *= 0.5;
    }
    let mut nu_max = b0;
    for _ in 0..200 {
        if residual(nu_max) < 0.0 {
            break;
        }
        nu_max *= 2.0;
    }
    let (nu, res, iters) = bisect_decreasing_log(nu_min, nu_max, residual_tolerance(cfg, tau_sum), cfg.max_bisection_iters, residual);

    let e0 = e0_at(nu)?;
    let energy = problem.energies(&e0, tau);
    let mut psi = vec![0.0; problem.len()];
    let mut lambda = vec![0.0; problem.len()];
    for &i in &nodes {
        let d = problem.throughput(i, e0[i], tau);
        psi[i] = d;
        lambda[i] = 1.0 / d;
    }
    Ok(FairSolution { e0, energy, state: PlfState { psi, lambda, nu }, residual: res, bisection_iters: iters })
}

/// Largest relative violation of `B_i / D_i = nu` on the support of `E0`
/// and `B_i / D_i <= nu` off it.
pub fn plf_certificate(problem: &Problem, tau: &[f64], sol: &PlfSolution) -> f64 {
    let nu = sol.state.nu;
    let mut worst: f64 = 0.0;
    for i in (0..problem.len()).filter(|&i| problem.is_active(i)) {
        let Ok(b) = problem.b_value(i, sol.energy[i], tau[i]) else { continue };
        let d = problem.throughput(i, sol.e0[i], tau);
        let r = (b / d - nu) / nu;
        worst = worst.max(if sol.e0[i] > 0.0 { r.abs() } else { r.max(0.0) });
    }
    worst
}

/// `-phi + nu Er`, the max-min Lagrangian at an inner solution.
pub fn mmf_loss(sol: &MmfSolution) -> f64 {
    -sol.state.phi + sol.state.nu * sol.residual
}

/// `-sum ln D + nu Er`, the proportional Lagrangian at an inner solution.
pub fn plf_loss(problem: &Problem, tau: &[f64], sol: &PlfSolution) -> f64 {
    let logs: f64 = (0..problem.len())
        .filter(|&i| problem.is_active(i))
        .map(|i| problem.throughput(i, sol.e0[i], tau).ln())
        .sum();
    -logs + sol.state.nu * sol.residual
}

/// Gradient of the max-min Lagrangian in the information slots.
pub fn mmf_gradient(tau: &[f64], problem: &Problem, sol: &MmfSolution, cfg: &SolverConfig) -> Result<Vec<f64>> {
    weighted_gradient(tau, &sol.energy, sol.state.nu, problem, &sol.state.lambda, cfg.gradient_mode)
}

/// Relative tolerances that decide which nodes count as sitting on the
/// boundary of the active set, one per widening level.
const KINK_LEVELS: [f64; 5] = [0.0, 1e-9, 1e-6, 1e-4, 1e-3];

/// Vertices of the max-min supergradient set at `level`. A node on the
/// boundary of the active set (tiny `E0`, or throughput at `phi` without
/// energy-slot help) may carry any multiplier between zero and its share
/// `nu / B_i`; each subset of such nodes taken fully in gives one vertex.
pub fn mmf_gradient_vertices(
    tau: &[f64],
    problem: &Problem,
    sol: &MmfSolution,
    cfg: &SolverConfig,
    level: usize,
) -> Result<Option<Vec<Vec<f64>>>> {
    let Some(&delta) = KINK_LEVELS.get(level) else { return Ok(None) };
    if sol.state.nu == 0.0 || sol.state.active_set.is_empty() {
        if level > 0 {
            return Ok(None);
        }
        return mmf_gradient(tau, problem, sol, cfg).map(|g| Some(vec![g]));
    }
    let phi = sol.state.phi;
    let mut fixed = Vec::new();
    let mut boundary = Vec::new();
    for i in (0..problem.len()).filter(|&i| problem.is_active(i)) {
        let in_set = sol.e0[i] > 0.0;
        let edge = if in_set {
            sol.e0[i] <= delta * sol.energy[i] / problem.gain(i)
        } else {
            problem.throughput(i, sol.e0[i], tau) <= phi * (1.0 + delta)
        };
        match (in_set, edge) {
            (_, true) => boundary.push(i),
            (true, false) => fixed.push(i),
            (false, false) => {}
        }
    }
    boundary.truncate(10);
    let b: Vec<f64> = (0..problem.len())
        .map(|i| {
            if problem.is_active(i) {
                problem.b_value(i, sol.energy[i], tau[i]).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            }
        })
        .collect();
    let mut out = Vec::new();
    for mask in 0..(1usize << boundary.len()) {
        let members: Vec<usize> = fixed
            .iter()
            .copied()
            .chain(boundary.iter().enumerate().filter(|(bit, _)| mask >> bit & 1 == 1).map(|(_, &i)| i))
            .collect();
        if members.is_empty() || members.iter().any(|&i| !(b[i] > 0.0)) {
            continue;
        }
        let nu = 1.0 / members.iter().map(|&i| 1.0 / b[i]).sum::<f64>();
        let mut lambda = vec![0.0; problem.len()];
        for &i in &members {
            lambda[i] = nu / b[i];
        }
        out.push(weighted_gradient(tau, &sol.energy, nu, problem, &lambda, cfg.gradient_mode)?);
    }
    Ok(Some(out))
}

/// Gradient of the proportional Lagrangian in the information slots.
pub fn plf_gradient(tau: &[f64], problem: &Problem, sol: &PlfSolution, cfg: &SolverConfig) -> Result<Vec<f64>> {
    weighted_gradient(tau, &sol.energy, sol.state.nu, problem, &sol.state.lambda, cfg.gradient_mode)
}

fn finish<S>(
    problem: &Problem,
    kind: Objective,
    out: descent::Outcome<FairSolution<S>>,
    kkt: impl Fn(&[f64], &FairSolution<S>) -> f64,
    nu: impl Fn(&S) -> f64,
) -> (Allocation, SolveReport, FairSolution<S>) {
    let sol = out.state;
    let mut alloc = Allocation::from_slots(problem, &out.tau, sol.e0.clone(), nu(&sol.state));
    alloc.energy = sol.energy.clone();
    let per_node: Vec<f64> = problem.throughputs(&sol.e0, &out.tau).into_iter().map(|d| d.max(0.0)).collect();
    let considered = || (0..problem.len()).filter(|&i| problem.is_active(i)).map(|i| per_node[i]);
    let objective = match kind {
        Objective::Mmf => considered().fold(f64::INFINITY, f64::min),
        Objective::Plf => considered().map(f64::ln).sum(),
        Objective::Sstm => per_node.iter().sum(),
    };
    let mut notes = Vec::new();
    let inactive = inactive_nodes(problem);
    if !inactive.is_empty() {
        notes.push(format!("nodes {inactive:?} have no positive secrecy rate and are excluded"));
    }
    if !out.converged {
        notes.push(format!("outer loop stopped after {} iterations without converging", out.iterations));
    }
    let report = SolveReport {
        objective_kind: kind,
        per_node,
        objective,
        iterations: out.iterations,
        converged: out.converged,
        kkt_residual: kkt(&out.tau, &sol),
        budget_residual: alloc.budget_residual(),
        inactive,
        notes,
    };
    (alloc, report, sol)
}

pub fn mmf_optimize_problem(problem: &Problem, cfg: &SolverConfig) -> Result<(Allocation, SolveReport)> {
    let (tau0, free) = initial_slots(problem);
    if !free.iter().any(|&f| f) {
        return Err(Error::NoActiveNodes);
    }
    let out = descent::descend(
        tau0,
        &free,
        cfg,
        |tau| {
            let sol = mmf_inner(tau, problem, cfg)?;
            Ok((outer_loss(mmf_loss(&sol), sol.state.nu, sol.residual), sol))
        },
        |tau, sol, level| mmf_gradient_vertices(tau, problem, sol, cfg, level),
    )?;
    let (mut alloc, report, sol) =
        finish(problem, Objective::Mmf, out, |t, s| mmf_certificate(problem, t, s), |s| s.nu);
    alloc.phi = Some(sol.state.phi);
    alloc.lambda = Some(sol.state.lambda);
    Ok((alloc, report))
}

pub fn plf_optimize_problem(problem: &Problem, cfg: &SolverConfig) -> Result<(Allocation, SolveReport)> {
    let (tau0, free) = initial_slots(problem);
    if !free.iter().any(|&f| f) {
        return Err(Error::NoActiveNodes);
    }
    let out = descent::descend(
        tau0,
        &free,
        cfg,
        |tau| {
            let sol = plf_inner(tau, problem, cfg)?;
            let loss = outer_loss(plf_loss(problem, tau, &sol), sol.state.nu, sol.residual);
            if !loss.is_finite() {
                return Err(Error::InvalidArgument("zero throughput in proportional objective".into()));
            }
            Ok((loss, sol))
        },
        |tau, sol, level| {
            if level > 0 {
                return Ok(None);
            }
            plf_gradient(tau, problem, sol, cfg).map(|g| Some(vec![g]))
        },
    )?;
    let (mut alloc, report, sol) =
        finish(problem, Objective::Plf, out, |t, s| plf_certificate(problem, t, s), |s| s.nu);
    alloc.psi = Some(sol.state.psi);
    alloc.lambda = Some(sol.state.lambda);
    Ok((alloc, report))
}

/// Maximizes the minimum secrecy throughput for the given blinding.
pub fn mmf_optimize(
    channels: &ChannelRealization,
    blinding: &BlindingMatrix,
    p_h: f64,
    cfg: &SolverConfig,
) -> Result<(Allocation, SolveReport)> {
    mmf_optimize_problem(&Problem::new(channels, blinding, p_h)?, cfg)
}

/// Maximizes the sum of log secrecy throughputs for the given blinding.
pub fn plf_optimize(
    channels: &ChannelRealization,
    blinding: &BlindingMatrix,
    p_h: f64,
    cfg: &SolverConfig,
) -> Result<(Allocation, SolveReport)> {
    plf_optimize_problem(&Problem::new(channels, blinding, p_h)?, cfg)
}
