//! Closed-form secrecy-throughput math shared by every solver and the oracle.
//!
//! All rates are in nats. `x = E / tau` is the transmit power of a node during
//! its own slot; the throughput of node `i` is
//! `tau * (ln(1 + zeta x) - ln(1 + xi x))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blinding::BlindingMatrix;
use crate::error::{Error, Result};
use crate::scenario::ChannelRealization;

/// Slot durations at or below this are treated as zero.
pub const EPS_TAU: f64 = 1e-12;

/// `ln(1 + zeta x) - ln(1 + xi x)`, evaluated without cancellation.
fn rate(zeta: f64, xi: f64, x: f64) -> f64 {
    ((zeta - xi) * x / (1.0 + xi * x)).ln_1p()
}

/// Secrecy throughput `D = tau * (ln(1 + zeta E/tau) - ln(1 + xi E/tau))`.
/// Zero for `tau <= EPS_TAU` or `E == 0`.
pub fn secrecy_throughput(zeta: f64, xi: f64, energy: f64, tau: f64) -> f64 {
    if tau <= EPS_TAU || energy == 0.0 {
        return 0.0;
    }
    tau * rate(zeta, xi, energy / tau)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > EPS_TAU {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("slot duration {tau} is at the zero boundary")))
    }
}

/// Marginal value of harvested energy,
/// `mu eta P_H (zeta - xi) / ((1 + zeta x)(1 + xi x))`.
pub fn b_function(
    zeta: f64,
    xi: f64,
    energy: f64,
    tau: f64,
    mu: f64,
    eta: f64,
    p_h: f64,
) -> Result<f64> {
    Ok(mu * eta * p_h * d_energy_partial(zeta, xi, energy, tau)?)
}

/// `dD/dtau` at fixed energy.
pub fn d_tau_partial(zeta: f64, xi: f64, energy: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let x = energy / tau;
    let main = 1.0 + zeta * x;
    let eve = 1.0 + xi * x;
    // 1/main - 1/eve = (xi - zeta) x / (main eve)
    Ok(rate(zeta, xi, x) + (xi - zeta) * x / (main * eve))
}

/// `dD/dE` at fixed slot duration.
pub fn d_energy_partial(zeta: f64, xi: f64, energy: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let x = energy / tau;
    Ok((zeta - xi) / ((1.0 + zeta * x) * (1.0 + xi * x)))
}

/// Energy that node `i` has harvested when its slot starts:
/// `mu eta P_H (E0 + sum_{j<i} tau_j a_{j,i})`.
pub fn harvested_energy(e0: f64, tau: &[f64], params: &NodeParams, p_h: f64) -> f64 {
    params.mu * params.eta * p_h * (e0 + params.an_harvest(tau))
}

/// Per-node constants of the stage-two problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Main-channel slope `|h_i|^2 / sigma^2`, 1/W.
    pub zeta: f64,
    /// Worst-case eavesdropper slope after blinding, 1/W (0 when alone).
    pub xi: f64,
    pub mu: f64,
    pub eta: f64,
    /// `a_{j,i}` for every earlier information slot `j < i`.
    pub harvest_coeffs: Vec<f64>,
}

impl NodeParams {
    /// Artificial-noise energy-time product `sum_{j<i} tau_j a_{j,i}`.
    /// `tau` holds information slots only; extra entries are ignored.
    pub fn an_harvest(&self, tau: &[f64]) -> f64 {
        self.harvest_coeffs.iter().zip(tau).map(|(a, t)| a * t).sum()
    }
}

/// Stage-two problem: node constants at a fixed base-station power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub nodes: Vec<NodeParams>,
    pub p_h: f64,
}

impl Problem {
    pub fn new(channels: &ChannelRealization, blinding: &BlindingMatrix, p_h: f64) -> Result<Self> {
        let k = channels.num_nodes();
        if blinding.weights.len() != k {
            return Err(Error::InvalidArgument(format!(
                "blinding matrix has {} rows for {k} nodes",
                blinding.weights.len()
            )));
        }
        if !(p_h > 0.0) {
            return Err(Error::InvalidArgument(format!("base-station power {p_h} must be positive")));
        }
        let nodes = (0..k)
            .map(|i| NodeParams {
                zeta: channels.zeta[i],
                xi: blinding.xi_star[i],
                mu: channels.mu[i],
                eta: channels.eta[i],
                harvest_coeffs: (0..i).map(|j| blinding.weights[j][i]).collect(),
            })
            .collect();
        Ok(Self { nodes, p_h })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `mu_i eta_i P_H`.
    pub fn gain(&self, i: usize) -> f64 {
        let n = &self.nodes[i];
        n.mu * n.eta * self.p_h
    }

    /// A node is active when it can reach a positive secrecy rate.
    pub fn is_active(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        n.zeta > n.xi && self.gain(i) > 0.0
    }

    pub fn active(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_active(i)).collect()
    }

    pub fn energy(&self, i: usize, e0: f64, tau: &[f64]) -> f64 {
        harvested_energy(e0, tau, &self.nodes[i], self.p_h)
    }

    pub fn energies(&self, e0: &[f64], tau: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.energy(i, e0[i], tau)).collect()
    }

    pub fn throughput(&self, i: usize, e0: f64, tau: &[f64]) -> f64 {
        let n = &self.nodes[i];
        secrecy_throughput(n.zeta, n.xi, self.energy(i, e0, tau), tau[i])
    }

    pub fn throughputs(&self, e0: &[f64], tau: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.throughput(i, e0[i], tau)).collect()
    }

    pub fn b_value(&self, i: usize, energy: f64, tau: f64) -> Result<f64> {
        let n = &self.nodes[i];
        b_function(n.zeta, n.xi, energy, tau, n.mu, n.eta, self.p_h)
    }
}

/// Decision variables plus dual certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// `tau[0]` is the dedicated energy slot; `tau[i]` the slot of node `i`.
    pub tau: Vec<f64>,
    /// Energy-slot products `E0_i = tau_0 a_{0,i}`.
    pub e0: Vec<f64>,
    /// Harvested energy per node.
    pub energy: Vec<f64>,
    pub nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
}

impl Allocation {
    /// Builds an allocation from information slots and energy-slot products,
    /// recovering `tau_0 = 1 - sum(tau)`.
    pub fn from_slots(problem: &Problem, info_tau: &[f64], e0: Vec<f64>, nu: f64) -> Self {
        let tau0 = 1.0 - info_tau.iter().sum::<f64>();
        let mut tau = Vec::with_capacity(info_tau.len() + 1);
        tau.push(tau0);
        tau.extend_from_slice(info_tau);
        let energy = problem.energies(&e0, info_tau);
        Self { tau, e0, energy, nu, lambda: None, phi: None, psi: None }
    }

    pub fn info_slots(&self) -> &[f64] {
        &self.tau[1..]
    }

    /// Energy-slot beamforming weights `a_{0,i} = E0_i / tau_0`.
    pub fn slot0_weights(&self) -> Vec<f64> {
        let tau0 = self.tau[0];
        if tau0 > EPS_TAU {
            self.e0.iter().map(|e| e / tau0).collect()
        } else {
            vec![0.0; self.e0.len()]
        }
    }

    /// Part of the energy slot not assigned to any node.
    pub fn idle_budget(&self) -> f64 {
        self.tau[0] - self.e0.iter().sum::<f64>()
    }

    /// `sum_i (E0_i + tau_i) - 1`.
    pub fn budget_residual(&self) -> f64 {
        self.e0.iter().sum::<f64>() + self.info_slots().iter().sum::<f64>() - 1.0
    }
}

/// A sampled point whose second difference broke concavity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityWitness {
    /// `(E0, tau_1 .. tau_{i-1}, tau_i)`.
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub second_difference: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub samples: usize,
    pub max_second_difference: f64,
    /// Largest `|second difference|` along directions orthogonal to the
    /// Hessian's range vector.
    pub max_orthogonal_residual: f64,
    /// Largest second difference along the range vector itself.
    pub max_range_second_difference: f64,
    pub violations: Vec<ConcavityWitness>,
}

impl ConcavityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.max_orthogonal_residual <= CONCAVITY_TOL
    }
}

pub const CONCAVITY_TOL: f64 = 1e-7;

/// Samples the throughput of one node as a function of
/// `(E0, tau_1, .., tau_i)` and checks that it is concave with a rank-one
/// Hessian. Violations are collected, never raised.
pub fn concavity_probe<R: Rng + ?Sized>(
    params: &NodeParams,
    p_h: f64,
    samples: usize,
    rng: &mut R,
) -> ConcavityReport {
    let earlier = params.harvest_coeffs.len();
    let dim = earlier + 2;
    let gain = params.mu * params.eta * p_h;
    let eval = |v: &[f64]| {
        let energy = gain * (v[0] + params.an_harvest(&v[1..=earlier]));
        secrecy_throughput(params.zeta, params.xi, energy, v[dim - 1])
    };
    let second_diff = |p: &[f64], d: &[f64], h: f64| {
        let plus: Vec<f64> = p.iter().zip(d).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = p.iter().zip(d).map(|(a, b)| a - h * b).collect();
        (eval(&plus) - 2.0 * eval(p) + eval(&minus)) / (h * h)
    };
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.into_iter().map(|a| a / n).collect::<Vec<_>>()
    };

    let h = 0.04;
    let mut report = ConcavityReport {
        samples,
        max_second_difference: f64::NEG_INFINITY,
        max_range_second_difference: f64::NEG_INFINITY,
        ..Default::default()
    };
    for _ in 0..samples {
        let point: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..1.0)).collect();
        let direction = unit((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());

        let sd = second_diff(&point, &direction, h);
        report.max_second_difference = report.max_second_difference.max(sd);
        if sd > CONCAVITY_TOL {
            report.violations.push(ConcavityWitness {
                point: point.clone(),
                direction: direction.clone(),
                second_difference: sd,
            });
        }

        // Range vector of the Hessian: (gain * beta, -E/tau_i).
        let energy = gain * (point[0] + params.an_harvest(&point[1..=earlier]));
        let x = energy / point[dim - 1];
        let mut range = Vec::with_capacity(dim);
        range.push(gain);
        range.extend(params.harvest_coeffs.iter().map(|a| gain * a));
        range.push(-x);
        let range = unit(range);

        let dot: f64 = direction.iter().zip(&range).map(|(a, b)| a * b).sum();
        let ortho: Vec<f64> = direction.iter().zip(&range).map(|(a, b)| a - dot * b).collect();
        let norm = ortho.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            let ortho: Vec<f64> = ortho.into_iter().map(|a| a / norm).collect();
            let residual = second_diff(&point, &ortho, h).abs();
            report.max_orthogonal_residual = report.max_orthogonal_residual.max(residual);
        }

        // A small step keeps the probe on the positive orthant.
        let step = 0.01;
        let rd = second_diff(&point, &range, step);
        report.max_range_second_difference = report.max_range_second_difference.max(rd);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let c = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        (4.0 * c(0.5 * h) - c(h)) / 3.0
    }

    #[test]
    fn throughput_examples() {
        let d = secrecy_throughput(10.0, 1.0, 1.0, 0.5);
        assert!((d - 0.5 * 7f64.ln()).abs() < 1e-15);
        assert!((d - 0.97296).abs() < 1e-5);
        assert_eq!(secrecy_throughput(10.0, 1.0, 0.0, 0.5), 0.0);
        assert_eq!(secrecy_throughput(3.0, 3.0, 2.0, 0.5), 0.0);
        assert_eq!(secrecy_throughput(3.0, 1.0, 2.0, 0.0), 0.0);
    }

    #[test]
    fn b_function_examples() {
        assert!((b_function(10.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!((b_function(10.0, 1.0, 0.0, 0.5, 2.0, 0.5, 3.0).unwrap() - 27.0).abs() < 1e-12);
        assert_eq!(b_function(4.0, 4.0, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(b_function(4.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn partial_derivative_edge_cases() {
        assert_eq!(d_tau_partial(10.0, 1.0, 0.0, 0.3).unwrap(), 0.0);
        assert_eq!(d_tau_partial(5.0, 5.0, 1.0, 0.3).unwrap(), 0.0);
        assert_eq!(d_energy_partial(10.0, 1.0, 0.0, 0.3).unwrap(), 9.0);
        assert!(d_tau_partial(1.0, 0.5, 1.0, 0.0).is_err());
        assert!(d_energy_partial(1.0, 0.5, 1.0, 1e-13).is_err());
        let (zeta, xi, e, t) = (7.0, 2.0, 0.4, 0.3);
        let b = b_function(zeta, xi, e, t, 1.5, 0.8, 2.0).unwrap();
        assert_eq!(b / (1.5 * 0.8 * 2.0), d_energy_partial(zeta, xi, e, t).unwrap());
    }

    #[test]
    fn partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let xi = 10f64.powf(rng.random_range(-2.0..3.0));
            let zeta = xi * 10f64.powf(rng.random_range(0.01..6.0));
            let e = rng.random_range(0.01..2.0);
            let t = rng.random_range(0.05..1.0);
            let dt = d_tau_partial(zeta, xi, e, t).unwrap();
            let fd = central_diff(|tt| secrecy_throughput(zeta, xi, e, tt), t, 1e-5 * t);
            assert!((dt - fd).abs() <= 1e-6 * dt.abs().max(1e-12), "{dt} vs {fd}");
            let de = d_energy_partial(zeta, xi, e, t).unwrap();
            let fd = central_diff(|ee| secrecy_throughput(zeta, xi, ee, t), e, 1e-5 * e);
            assert!((de - fd).abs() <= 1e-6 * de.abs().max(1e-12), "{de} vs {fd}");
        }
    }

    #[test]
    fn harvested_energy_examples() {
        let p = NodeParams { zeta: 1.0, xi: 0.0, mu: 1.0, eta: 1.0, harvest_coeffs: vec![0.5] };
        assert!((harvested_energy(0.1, &[0.2, 0.3], &p, 2.0) - 0.4).abs() < 1e-15);
        let p0 = NodeParams { harvest_coeffs: vec![0.0], ..p.clone() };
        assert_eq!(harvested_energy(0.0, &[0.2], &p0, 2.0), 0.0);
        let dead = NodeParams { eta: 0.0, ..p };
        assert_eq!(harvested_energy(0.1, &[0.2], &dead, 2.0), 0.0);
    }

    #[test]
    fn sign_and_monotonicity() {
        for &(zeta, xi) in &[(5.0, 1.0), (1.0, 5.0), (2.0, 2.0)] {
            let mut prev_d = 0.0;
            let mut prev_b = f64::INFINITY;
            for k in 1..200 {
                let e = k as f64 * 0.05;
                let d = secrecy_throughput(zeta, xi, e, 0.4);
                assert_eq!(d >= 0.0, zeta >= xi);
                if zeta > xi {
                    assert!(d >= prev_d);
                    let b = b_function(zeta, xi, e, 0.4, 1.0, 1.0, 1.0).unwrap();
                    assert!(b < prev_b);
                    prev_b = b;
                }
                prev_d = d;
            }
        }
    }

    #[test]
    fn large_energy_limit() {
        let (zeta, xi, tau) = (40.0, 3.0, 0.6);
        let d = secrecy_throughput(zeta, xi, 1e9 / zeta, tau);
        let limit = tau * (zeta.ln() - xi.ln());
        assert!((d - limit).abs() <= 1e-3 * limit);
    }

    #[test]
    fn concavity_probe_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = NodeParams { zeta: 80.0, xi: 4.0, mu: 1.3, eta: 0.7, harvest_coeffs: vec![0.2, 0.6] };
        let r = concavity_probe(&p, 2.0, 500, &mut rng);
        assert!(r.passed(), "{r:?}");
        assert!(r.max_range_second_difference < 0.0);
    }

    #[test]
    fn concavity_probe_degenerate_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = NodeParams { zeta: 6.0, xi: 6.0, mu: 1.0, eta: 1.0, harvest_coeffs: vec![0.5] };
        let r = concavity_probe(&p, 1.0, 200, &mut rng);
        assert!(r.passed());
        assert!(r.max_second_difference.abs() < 1e-9);
    }

    #[test]
    fn concavity_probe_reports_convex_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = NodeParams { zeta: 1.0, xi: 20.0, mu: 1.0, eta: 1.0, harvest_coeffs: vec![] };
        let r = concavity_probe(&p, 1.0, 100, &mut rng);
        assert!(!r.violations.is_empty());
        assert!(r.violations[0].second_difference > CONCAVITY_TOL);
    }

    #[test]
    fn allocation_recovers_slot_zero() {
        let problem = Problem {
            nodes: vec![
                NodeParams { zeta: 9.0, xi: 1.0, mu: 1.0, eta: 1.0, harvest_coeffs: vec![] },
                NodeParams { zeta: 9.0, xi: 1.0, mu: 1.0, eta: 1.0, harvest_coeffs: vec![1.0] },
            ],
            p_h: 1.0,
        };
        let a = Allocation::from_slots(&problem, &[0.3, 0.2], vec![0.4, 0.1], 1.0);
        assert!((a.tau[0] - 0.5).abs() < 1e-15);
        assert!(a.budget_residual().abs() < 1e-15);
        assert!(a.idle_budget().abs() < 1e-15);
        let w = a.slot0_weights();
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.2).abs() < 1e-15);
        assert!((a.energy[1] - 0.4).abs() < 1e-15);
    }
}
