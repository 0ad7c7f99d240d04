//! Reference schemes: uniform slots and weights (UTW), stage-one blinding
//! with uniform slots (UT), and the stage-two optimizer on uniform blinding (UB).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blinding::{blind_all, BlindingMatrix};
use crate::error::{Error, Result};
use crate::report::{Objective, SolveReport};
use crate::scenario::ChannelRealization;
use crate::secrecy::{Allocation, Problem};
use crate::sstm::{optimize_problem, SolverConfig};

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Utw,
    Ut,
    Ub,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Utw, BaselineKind::Ut, BaselineKind::Ub];
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Utw => "utw",
            BaselineKind::Ut => "ut",
            BaselineKind::Ub => "ub",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "utw" => Ok(BaselineKind::Utw),
            "ut" => Ok(BaselineKind::Ut),
            "ub" => Ok(BaselineKind::Ub),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

fn check_simplex(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument(format!("{name} has negative or non-finite entries")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("{name} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Per-node secrecy throughputs, floored at zero, at a fixed point.
///
/// `a0` are the energy-slot beam shares and `tau` the full frame with the
/// energy slot first.
pub fn evaluate_fixed(
    channels: &ChannelRealization,
    blinding: &BlindingMatrix,
    a0: &[f64],
    tau: &[f64],
    p_h: f64,
) -> Result<Vec<f64>> {
    let k = channels.num_nodes();
    if a0.len() != k || tau.len() != k + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {k} energy weights and {} slots, got {} and {}",
            k + 1,
            a0.len(),
            tau.len()
        )));
    }
    check_simplex("energy-slot weights", a0)?;
    check_simplex("time slots", tau)?;
    if k > 1 {
        for (i, row) in blinding.weights.iter().enumerate() {
            check_simplex(&format!("blinding row {i}"), row)?;
        }
    }
    let problem = Problem::new(channels, blinding, p_h)?;
    let e0: Vec<f64> = a0.iter().map(|a| tau[0] * a).collect();
    Ok(problem.throughputs(&e0, &tau[1..]).into_iter().map(|d| d.max(0.0)).collect())
}

fn uniform_point(k: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![1.0 / k as f64; k], vec![1.0 / (k + 1) as f64; k + 1])
}

fn fixed_report(
    channels: &ChannelRealization,
    blinding: &BlindingMatrix,
    p_h: f64,
) -> Result<(Allocation, SolveReport)> {
    let k = channels.num_nodes();
    let (a0, tau) = uniform_point(k);
    let problem = Problem::new(channels, blinding, p_h)?;
    let per_node = evaluate_fixed(channels, blinding, &a0, &tau, p_h)?;
    let e0: Vec<f64> = a0.iter().map(|a| tau[0] * a).collect();
    let alloc = Allocation::from_slots(&problem, &tau[1..], e0, 0.0);
    let inactive: Vec<usize> = (0..k).filter(|&i| !problem.is_active(i)).collect();
    let mut notes = Vec::new();
    if !inactive.is_empty() {
        notes.push(format!("nodes {inactive:?} have no positive secrecy rate; reported as 0"));
    }
    let report = SolveReport {
        objective_kind: Objective::Sstm,
        objective: per_node.iter().sum(),
        per_node,
        iterations: 0,
        converged: true,
        kkt_residual: 0.0,
        budget_residual: alloc.budget_residual(),
        inactive,
        notes,
    };
    Ok((alloc, report))
}

pub fn run_baseline(
    kind: BaselineKind,
    channels: &ChannelRealization,
    p_h: f64,
    cfg: &SolverConfig,
) -> Result<(Allocation, SolveReport)> {
    match kind {
        BaselineKind::Utw => fixed_report(channels, &BlindingMatrix::uniform(channels, p_h), p_h),
        BaselineKind::Ut => fixed_report(channels, &blind_all(channels, p_h)?, p_h),
        BaselineKind::Ub => {
            let problem = Problem::new(channels, &BlindingMatrix::uniform(channels, p_h), p_h)?;
            optimize_problem(&problem, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{draw_channels, Fading, Scenario};
    use crate::sstm::optimize;

    fn two_symmetric() -> ChannelRealization {
        ChannelRealization::from_gains(&[2.0, 2.0], &[3.0, 3.0], &[vec![0.0, 0.4], vec![0.4, 0.0]], 1e-3, &[1.0, 1.0])
            .unwrap()
    }

    #[test]
    fn zero_energy_gives_zero_throughput() {
        let ch = two_symmetric();
        let mut a = BlindingMatrix::uniform(&ch, 1.0);
        a.weights = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = evaluate_fixed(&ch, &a, &[0.5, 0.5], &[0.0, 0.5, 0.5], 1.0).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_utw_is_equal_only_without_coupling() {
        let ch = two_symmetric();
        let (_, r) = run_baseline(BaselineKind::Utw, &ch, 1.0, &SolverConfig::default()).unwrap();
        // Node 1 also harvests during node 0's slot.
        assert!(r.per_node[1] > r.per_node[0]);
        let ch = ChannelRealization::from_gains(&[2.0], &[3.0], &[vec![0.0]], 1e-3, &[1.0]).unwrap();
        let a = BlindingMatrix::uniform(&ch, 1.0);
        let d = evaluate_fixed(&ch, &a, &[1.0], &[0.5, 0.5], 1.0).unwrap();
        assert!((d[0] - 0.5 * (1.0f64 + 3.0 / 1e-3 * 2.0 * 0.5 / 0.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn utw_matches_hand_evaluation() {
        let ch = draw_channels(&Scenario::reference(Fading::Rayleigh, 5)).unwrap();
        let p_h = 1.0;
        let k = ch.num_nodes();
        let (_, r) = run_baseline(BaselineKind::Utw, &ch, p_h, &SolverConfig::default()).unwrap();
        let t = 1.0 / (k + 1) as f64;
        for i in 0..k {
            let xi = (0..k)
                .filter(|&j| j != i)
                .map(|j| ch.cross_gain(i, j) / (ch.noise_w + ch.mu[j] * p_h / k as f64))
                .fold(0.0, f64::max);
            let energy = ch.mu[i] * ch.eta[i] * p_h * (t / k as f64 + i as f64 * t / k as f64);
            let zeta = ch.zeta[i];
            let want = (t * ((1.0 + zeta * energy / t) / (1.0 + xi * energy / t)).ln()).max(0.0);
            assert!((r.per_node[i] - want).abs() <= 1e-12 * want.max(1.0), "{i}: {} vs {want}", r.per_node[i]);
        }
    }

    #[test]
    fn rejects_malformed_inputs() {
        let ch = two_symmetric();
        let a = BlindingMatrix::uniform(&ch, 1.0);
        assert!(evaluate_fixed(&ch, &a, &[0.7, 0.7], &[0.2, 0.4, 0.4], 1.0).is_err());
        assert!(evaluate_fixed(&ch, &a, &[0.5, 0.5], &[0.2, 0.4], 1.0).is_err());
        assert!(evaluate_fixed(&ch, &a, &[0.5, 0.5], &[0.5, 0.4, 0.4], 1.0).is_err());
    }

    #[test]
    fn single_node_baselines_coincide() {
        let ch = ChannelRealization::from_gains(&[2.0], &[3.0], &[vec![0.0]], 1e-3, &[1.0]).unwrap();
        let cfg = SolverConfig::default();
        let (_, utw) = run_baseline(BaselineKind::Utw, &ch, 1.0, &cfg).unwrap();
        let (_, ut) = run_baseline(BaselineKind::Ut, &ch, 1.0, &cfg).unwrap();
        let (_, ub) = run_baseline(BaselineKind::Ub, &ch, 1.0, &cfg).unwrap();
        let (_, sstm) = optimize(&ch, &blind_all(&ch, 1.0).unwrap(), 1.0, &cfg).unwrap();
        assert_eq!(utw.per_node, ut.per_node);
        assert!((ub.objective - sstm.objective).abs() <= 1e-12 * sstm.objective);
        assert!(ub.objective >= utw.objective);
    }

    #[test]
    fn optimizers_beat_fixed_schemes_on_reference_layout() {
        let cfg = SolverConfig::default();
        for seed in 0..5 {
            let ch = draw_channels(&Scenario::reference(Fading::Rayleigh, seed)).unwrap();
            let (_, utw) = run_baseline(BaselineKind::Utw, &ch, 1.0, &cfg).unwrap();
            let (_, ub) = run_baseline(BaselineKind::Ub, &ch, 1.0, &cfg).unwrap();
            let (_, sstm) = optimize(&ch, &blind_all(&ch, 1.0).unwrap(), 1.0, &cfg).unwrap();
            assert!(ub.objective >= utw.objective - 1e-9);
            assert!(sstm.objective >= utw.objective - 1e-9);
        }
    }
}
