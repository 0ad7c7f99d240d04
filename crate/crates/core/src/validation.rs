//! The oracle suite behind `wpcn validate`: random small instances, each
//! solved by every solver and checked against [`crate::oracle`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blinding::blind_all;
use crate::error::Result;
use crate::fairness::{
    mmf_gradient, mmf_inner, mmf_loss, mmf_optimize_problem, plf_gradient, plf_inner, plf_loss, plf_optimize_problem,
};
use crate::oracle::{cg_solve, fd_check, simplex_grid_min_max_xi, CgConfig, CgObjective, OracleReport};
use crate::scenario::{draw_channels, Scenario};
use crate::secrecy::Problem;
use crate::sstm::{inner_allocate, lagrangian, optimize_problem, weighted_gradient, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Grid resolution of the blinding check and the allowed relative excess.
    pub grid_resolution: f64,
    pub blinding_excess: f64,
    pub blinding_kkt: f64,
    pub objective: f64,
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { grid_resolution: 1e-3, blinding_excess: 2e-3, blinding_kkt: 1e-9, objective: 1e-4, gradient: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub index: usize,
    pub k: usize,
    pub p_h_dbm: f64,
    /// Largest `(xi_solver - xi_grid) / xi_grid` over the slots.
    pub blinding_excess: f64,
    pub blinding_kkt: f64,
    pub max_removals: usize,
    pub oracle: Vec<(String, OracleReport)>,
    /// Largest normalized directional finite-difference error of the three gradients.
    pub gradient_error: f64,
    pub failures: Vec<String>,
}

impl InstanceCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub instances: Vec<InstanceCheck>,
    pub passed: bool,
}

/// Random scenario with 2 to 4 nodes for instance `index`.
pub fn random_instance(seed: u64, index: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let k = rng.random_range(2..=4);
    let n = rng.random_range(2..=16);
    Scenario::random(&mut rng, k, n)
}

/// Interior slot vector for gradient checks: active nodes share a random
/// fraction of the frame between 0.3 and 0.8.
pub fn random_interior_slots<R: Rng + ?Sized>(rng: &mut R, active: &[bool]) -> Vec<f64> {
    let raw: Vec<f64> = active.iter().map(|&a| if a { rng.random_range(0.2..1.0) } else { 0.0 }).collect();
    let total = rng.random_range(0.3..0.8);
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x * total / s).collect()
}

/// `|fd - claimed| / (|g| |d|)` along `g` and along one random direction.
pub fn directional_error<R: Rng + ?Sized>(
    rng: &mut R,
    tau: &[f64],
    active: &[bool],
    g: &[f64],
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    let random: Vec<f64> = active.iter().map(|&a| if a { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
    let along_g: Vec<f64> = g.iter().zip(active).map(|(x, &a)| if a { *x } else { 0.0 }).collect();
    for d in [along_g, random] {
        let nd = norm(&d);
        if nd == 0.0 {
            continue;
        }
        let d: Vec<f64> = d.iter().map(|x| x / nd).collect();
        let claimed: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let r = fd_check(&f, tau, &d, claimed, &[1e-5, 1e-6]);
        worst = worst.max(r.best_error * claimed.abs() / norm(g).max(1e-300));
    }
    worst
}

/// Solver settings for finite-difference checks: inner bisection run to
/// machine precision so the value function is smooth at the step sizes used.
pub fn tight_config() -> SolverConfig {
    SolverConfig { bisection_eps: 0.0, max_bisection_iters: 2000, ..SolverConfig::default() }
}

pub fn check_instance(index: usize, seed: u64, tol: &Tolerances) -> Result<InstanceCheck> {
    let scenario = random_instance(seed, index);
    let ch = draw_channels(&scenario)?;
    let p_h = scenario.p_h_watts();
    let k = ch.num_nodes();
    let mut failures = Vec::new();

    let blinding = blind_all(&ch, p_h)?;
    let mut blinding_excess: f64 = f64::NEG_INFINITY;
    for i in 0..k {
        let (_, grid) = simplex_grid_min_max_xi(i, &ch, p_h, tol.grid_resolution)?;
        blinding_excess = blinding_excess.max((blinding.xi_star[i] - grid) / grid);
    }
    if blinding_excess > tol.blinding_excess {
        failures.push(format!("blinding exceeds grid optimum by {blinding_excess:e}"));
    }
    let blinding_kkt = blinding.kkt_residual(&ch, p_h);
    if blinding_kkt > tol.blinding_kkt {
        failures.push(format!("blinding equal-slope residual {blinding_kkt:e}"));
    }
    let max_removals = blinding.iterations.iter().copied().max().unwrap_or(0);
    if max_removals + 2 > k.max(2) {
        failures.push(format!("{max_removals} removal rounds for {k} nodes"));
    }

    let problem = Problem::new(&ch, &blinding, p_h)?;
    let cfg = SolverConfig::default();
    let cg = CgConfig::default();
    let mut oracle = Vec::new();
    if problem.active().iter().any(|&a| a) {
        let (_, s) = optimize_problem(&problem, &cfg)?;
        let (_, m) = mmf_optimize_problem(&problem, &cfg)?;
        let (_, p) = plf_optimize_problem(&problem, &cfg)?;
        let active: Vec<usize> = (0..k).filter(|&i| problem.is_active(i)).collect();
        let logsum: f64 = active.iter().map(|&i| p.per_node[i].ln()).sum();
        for (name, obj, value, kkt) in [
            ("sstm", CgObjective::Sum, s.objective, s.kkt_residual),
            ("mmf", CgObjective::Min, m.objective, m.kkt_residual),
            ("plf", CgObjective::LogSum, logsum, p.kkt_residual),
        ] {
            let reference = cg_solve(&problem, obj, &cg)?;
            let rep = OracleReport::compare(&reference, value, kkt);
            if !rep.within(tol.objective) {
                failures.push(format!(
                    "{name}: solver {value} vs oracle {} (bound {})",
                    reference.objective, reference.upper_bound
                ));
            }
            oracle.push((name.to_string(), rep));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    rng.set_stream(index as u64);
    let active = problem.active();
    let mut gradient_error: f64 = 0.0;
    if active.iter().any(|&a| a) {
        let tight = tight_config();
        let tau = random_interior_slots(&mut rng, &active);
        let ones = vec![1.0; k];
        let sol = inner_allocate(&tau, &problem, &tight)?;
        let g = weighted_gradient(&tau, &sol.energy, sol.nu, &problem, &ones, tight.gradient_mode)?;
        let value = |t: &[f64]| inner_allocate(t, &problem, &tight).map_or(f64::NAN, |s| lagrangian(&problem, t, &s));
        gradient_error = gradient_error.max(directional_error(&mut rng, &tau, &active, &g, value));

        let sol = mmf_inner(&tau, &problem, &tight)?;
        let g = mmf_gradient(&tau, &problem, &sol, &tight)?;
        let value = |t: &[f64]| mmf_inner(t, &problem, &tight).map_or(f64::NAN, |s| mmf_loss(&s));
        gradient_error = gradient_error.max(directional_error(&mut rng, &tau, &active, &g, value));

        let sol = plf_inner(&tau, &problem, &tight)?;
        let g = plf_gradient(&tau, &problem, &sol, &tight)?;
        let value = |t: &[f64]| plf_inner(t, &problem, &tight).map_or(f64::NAN, |s| plf_loss(&problem, t, &s));
        gradient_error = gradient_error.max(directional_error(&mut rng, &tau, &active, &g, value));
        if !(gradient_error <= tol.gradient) {
            failures.push(format!("gradient finite-difference error {gradient_error:e}"));
        }
    }

    Ok(InstanceCheck {
        index,
        k,
        p_h_dbm: scenario.p_h_dbm,
        blinding_excess,
        blinding_kkt,
        max_removals,
        oracle,
        gradient_error,
        failures,
    })
}

/// Runs [`check_instance`] on `instances` random instances in parallel.
pub fn validate(instances: usize, seed: u64, tol: &Tolerances) -> ValidationReport {
    let checks: Vec<InstanceCheck> = (0..instances)
        .into_par_iter()
        .map(|i| {
            check_instance(i, seed, tol).unwrap_or_else(|e| InstanceCheck {
                index: i,
                k: 0,
                p_h_dbm: f64::NAN,
                blinding_excess: f64::NAN,
                blinding_kkt: f64::NAN,
                max_removals: 0,
                oracle: Vec::new(),
                gradient_error: f64::NAN,
                failures: vec![e.to_string()],
            })
        })
        .collect();
    let passed = checks.iter().all(InstanceCheck::passed);
    ValidationReport { seed, tolerances: tol.clone(), instances: checks, passed }
}
