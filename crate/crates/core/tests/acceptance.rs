//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use wpcn_secrecy::blinding::blind_slot;
use wpcn_secrecy::fairness::{
    mmf_certificate, mmf_gradient, mmf_inner, mmf_loss, mmf_optimize_problem, plf_certificate, plf_gradient,
    plf_inner, plf_loss, plf_optimize_problem,
};
use wpcn_secrecy::harness::{run_experiment, write_csv, ExperimentConfig, OneOrMany, ResultRecord, SolverKind};
use wpcn_secrecy::oracle::{cg_solve, simplex_grid_min_max_xi, CgConfig, CgObjective, OracleReport};
use wpcn_secrecy::secrecy::concavity_probe;
use wpcn_secrecy::sstm::{inner_allocate, inner_kkt_residual, lagrangian, optimize_problem, weighted_gradient};
use wpcn_secrecy::validation::{directional_error, random_instance, random_interior_slots, tight_config};
use wpcn_secrecy::{blind_all, draw_channels, Fading, NodeParams, Problem, SolverConfig};

const SEED: u64 = 20_240_611;
const POWERS: [f64; 5] = [0.0, 10.0, 20.0, 30.0, 40.0];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn instance(seed: u64, index: usize) -> (wpcn_secrecy::ChannelRealization, Problem) {
    let s = random_instance(seed, index);
    let ch = draw_channels(&s).expect("channels");
    let b = blind_all(&ch, s.p_h_watts()).expect("blinding");
    let p = Problem::new(&ch, &b, s.p_h_watts()).expect("problem");
    (ch, p)
}

fn criterion_blinding() -> (Outcome, Outcome) {
    let start = Instant::now();
    let rows: Vec<(f64, f64, usize, usize)> = (0..100)
        .into_par_iter()
        .map(|idx| {
            let s = random_instance(SEED, idx);
            let ch = draw_channels(&s).expect("channels");
            let p_h = s.p_h_watts();
            let k = ch.num_nodes();
            let mut excess = f64::NEG_INFINITY;
            let mut kkt: f64 = 0.0;
            let mut rounds = 0;
            for i in 0..k {
                let slot = blind_slot(i, &ch, p_h).expect("blind_slot");
                let (_, grid) = simplex_grid_min_max_xi(i, &ch, p_h, 1e-3).expect("grid");
                excess = excess.max((slot.xi - grid) / grid);
                rounds = rounds.max(slot.removals);
                for j in (0..k).filter(|&j| j != i) {
                    let a = slot.weights[j];
                    let slope = ch.cross_gain(i, j) / (ch.noise_w + ch.mu[j] * a * p_h);
                    let r = (slope - slot.xi) / slot.xi;
                    kkt = kkt.max(if a > 0.0 { r.abs() } else { r.max(0.0) });
                }
            }
            (excess, kkt, rounds, k)
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let excess = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let kkt = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let over = rows.iter().filter(|r| r.2 + 2 > r.3.max(2)).count();
    let max_rounds = rows.iter().map(|r| r.2).max().unwrap_or(0);
    (
        Outcome::new(
            excess <= 2e-3 && kkt <= 1e-9 && secs <= 60.0,
            format!("max excess over grid {excess:.3e}, max equal-slope residual {kkt:.3e}, {secs:.1} s"),
        ),
        Outcome::new(over == 0, format!("max removal rounds {max_rounds}, {over} instances above K-2")),
    )
}

fn criterion_kkt() -> Outcome {
    let cfg = SolverConfig::default();
    let rows: Vec<[f64; 6]> = (0..100)
        .into_par_iter()
        .filter_map(|idx| {
            let (_, p) = instance(SEED + 1, idx);
            let active = p.active();
            if !active.iter().any(|&a| a) {
                return None;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
            rng.set_stream(idx as u64);
            let tau = random_interior_slots(&mut rng, &active);
            let s = inner_allocate(&tau, &p, &cfg).expect("sum inner");
            let m = mmf_inner(&tau, &p, &cfg).expect("mmf inner");
            let l = plf_inner(&tau, &p, &cfg).expect("plf inner");
            Some([
                inner_kkt_residual(&p, &tau, &s),
                mmf_certificate(&p, &tau, &m),
                plf_certificate(&p, &tau, &l),
                s.residual.abs(),
                m.residual.abs(),
                l.residual.abs(),
            ])
        })
        .collect();
    let worst = |c: usize| rows.iter().map(|r| r[c]).fold(0.0, f64::max);
    let kkt = [worst(0), worst(1), worst(2)];
    let er = [worst(3), worst(4), worst(5)];
    Outcome::new(
        rows.len() == 100 && kkt.iter().all(|&x| x <= 1e-6) && er.iter().all(|&x| x <= 1e-9),
        format!(
            "{} instances; KKT sum/mmf/plf {:.2e}/{:.2e}/{:.2e}; |Er| {:.2e}/{:.2e}/{:.2e}",
            rows.len(),
            kkt[0],
            kkt[1],
            kkt[2],
            er[0],
            er[1],
            er[2]
        ),
    )
}

fn criterion_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let cg = CgConfig::default();
    let rows: Vec<Vec<(&str, OracleReport, f64)>> = (0..50)
        .into_par_iter()
        .map(|idx| {
            let (_, p) = instance(SEED + 2, idx);
            if !p.active().iter().any(|&a| a) {
                return Vec::new();
            }
            let (_, s) = optimize_problem(&p, &cfg).expect("sstm");
            let (_, m) = mmf_optimize_problem(&p, &cfg).expect("mmf");
            let (_, l) = plf_optimize_problem(&p, &cfg).expect("plf");
            let logsum: f64 = (0..p.len()).filter(|&i| p.is_active(i)).map(|i| l.per_node[i].ln()).sum();
            [
                ("sstm", CgObjective::Sum, s.objective, s.kkt_residual),
                ("mmf", CgObjective::Min, m.objective, m.kkt_residual),
                ("plf", CgObjective::LogSum, logsum, l.kkt_residual),
            ]
            .into_iter()
            .map(|(name, obj, value, kkt)| {
                let r = cg_solve(&p, obj, &cg).expect("oracle");
                (name, OracleReport::compare(&r, value, kkt), r.smoothing_bound)
            })
            .collect()
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let mut worst: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut fails = 0;
    let mut smoothing: f64 = 0.0;
    for (name, rep, sb) in rows.iter().flatten() {
        let w = worst.entry(name).or_insert((f64::NEG_INFINITY, f64::INFINITY));
        w.0 = w.0.max(rep.objective_gap);
        w.1 = w.1.min(rep.bound_gap);
        smoothing = smoothing.max(*sb);
        if !rep.within(1e-4) {
            fails += 1;
        }
    }
    let detail = worst
        .iter()
        .map(|(n, (g, b))| format!("{n} gap {g:.1e} bound {b:.1e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(
        fails == 0 && secs <= 600.0,
        format!("{detail}; mmf smoothing bound {smoothing:.1e}; {fails} misses; {secs:.1} s"),
    )
}

fn criterion_gradients() -> Outcome {
    let tight = tight_config();
    let errs: Vec<[f64; 3]> = (0..100)
        .into_par_iter()
        .filter_map(|idx| {
            let (_, p) = instance(SEED + 3, idx);
            let active = p.active();
            if !active.iter().any(|&a| a) {
                return None;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
            rng.set_stream(idx as u64);
            let tau = random_interior_slots(&mut rng, &active);
            let ones = vec![1.0; p.len()];

            let s = inner_allocate(&tau, &p, &tight).ok()?;
            let g = weighted_gradient(&tau, &s.energy, s.nu, &p, &ones, tight.gradient_mode).ok()?;
            let f = |t: &[f64]| inner_allocate(t, &p, &tight).map_or(f64::NAN, |s| lagrangian(&p, t, &s));
            let e_sum = directional_error(&mut rng, &tau, &active, &g, f);

            let m = mmf_inner(&tau, &p, &tight).ok()?;
            let g = mmf_gradient(&tau, &p, &m, &tight).ok()?;
            let f = |t: &[f64]| mmf_inner(t, &p, &tight).map_or(f64::NAN, |s| mmf_loss(&s));
            let e_mmf = directional_error(&mut rng, &tau, &active, &g, f);

            let l = plf_inner(&tau, &p, &tight).ok()?;
            let g = plf_gradient(&tau, &p, &l, &tight).ok()?;
            let f = |t: &[f64]| plf_inner(t, &p, &tight).map_or(f64::NAN, |s| plf_loss(&p, t, &s));
            let e_plf = directional_error(&mut rng, &tau, &active, &g, f);
            Some([e_sum, e_mmf, e_plf])
        })
        .collect();
    let worst = |c: usize| errs.iter().map(|r| r[c]).fold(0.0, f64::max);
    let w = [worst(0), worst(1), worst(2)];
    Outcome::new(
        errs.len() == 100 && w.iter().all(|&e| e <= 1e-5),
        format!("{} points; worst relative error sum/mmf/plf {:.2e}/{:.2e}/{:.2e}", errs.len(), w[0], w[1], w[2]),
    )
}

fn criterion_concavity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut samples = 0;
    let mut violations = 0;
    let mut orth: f64 = 0.0;
    for _ in 0..100 {
        let xi = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.01..50.0) };
        let zeta = xi + rng.random_range(0.1..500.0);
        let earlier = rng.random_range(0..4);
        let params = NodeParams {
            zeta,
            xi,
            mu: rng.random_range(0.1..2.0),
            eta: rng.random_range(0.3..1.0),
            harvest_coeffs: (0..earlier).map(|_| rng.random_range(0.0..1.0)).collect(),
        };
        let rep = concavity_probe(&params, rng.random_range(0.01..5.0), 100, &mut rng);
        samples += rep.samples;
        violations += rep.violations.len();
        orth = orth.max(rep.max_orthogonal_residual);
    }
    Outcome::new(
        samples >= 10_000 && violations == 0,
        format!("{samples} samples, {violations} violations, max off-range curvature {orth:.1e}"),
    )
}

fn reference(fading: Fading, trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference(fading, trials, SEED);
    cfg.p_h_dbm = OneOrMany::Many(POWERS.to_vec());
    cfg
}

fn mean_of(records: &[ResultRecord], solver: SolverKind, p: f64, f: impl Fn(&ResultRecord) -> f64) -> f64 {
    let xs: Vec<f64> = records.iter().filter(|r| r.solver == solver && r.p_h_dbm == p && r.is_ok()).map(f).collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criterion_baselines(rayleigh: &[ResultRecord], rician: &[ResultRecord], secs: f64) -> Outcome {
    use SolverKind::*;
    let mut bad = Vec::new();
    let failed = rayleigh.iter().chain(rician).filter(|r| !r.is_ok()).count();
    for (name, recs) in [("rayleigh", rayleigh), ("rician", rician)] {
        for p in POWERS {
            let m: Vec<f64> = [Sstm, Ub, Ut, Utw].iter().map(|&s| mean_of(recs, s, p, |r| r.sum)).collect();
            if !(m[0] >= m[1] && m[1] >= m[2] && m[2] >= m[3]) {
                bad.push(format!("{name} {p} dBm: sstm {:.4} ub {:.4} ut {:.4} utw {:.4}", m[0], m[1], m[2], m[3]));
            }
        }
    }
    for p in POWERS {
        let a = mean_of(rician, Sstm, p, |r| r.sum);
        let b = mean_of(rayleigh, Sstm, p, |r| r.sum);
        if a < b {
            bad.push(format!("{p} dBm: rician sstm {a:.4} < rayleigh {b:.4}"));
        }
    }
    let detail = if bad.is_empty() {
        let s: Vec<String> = POWERS
            .iter()
            .map(|&p| {
                format!(
                    "{p}dBm {:.2}/{:.2}/{:.2}/{:.2}",
                    mean_of(rayleigh, Sstm, p, |r| r.sum),
                    mean_of(rayleigh, Ub, p, |r| r.sum),
                    mean_of(rayleigh, Ut, p, |r| r.sum),
                    mean_of(rayleigh, Utw, p, |r| r.sum)
                )
            })
            .collect();
        format!("rayleigh sstm/ub/ut/utw {}", s.join(", "))
    } else {
        bad.join("; ")
    };
    Outcome::new(bad.is_empty() && failed == 0 && secs <= 900.0, format!("{detail}; {failed} failed solves; {secs:.1} s"))
}

fn criterion_fairness(records: &[ResultRecord]) -> Outcome {
    use SolverKind::*;
    let mut by_point: BTreeMap<(usize, i64), BTreeMap<SolverKind, &ResultRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        by_point.entry((r.trial, r.p_h_dbm as i64)).or_default().insert(r.solver, r);
    }
    let mut checked = 0;
    let mut bad = Vec::new();
    for ((trial, p), m) in &by_point {
        let (s, f, l) = (m[&Sstm], m[&Mmf], m[&Plf]);
        if !(s.all_active && f.all_active && l.all_active) {
            continue;
        }
        checked += 1;
        let sum = |r: &ResultRecord| r.per_node.iter().sum::<f64>();
        let min = |r: &ResultRecord| r.per_node.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-7;
        if sum(s) < sum(l) - tol || sum(l) < sum(f) - tol || min(f) < min(l) - tol || min(l) < min(s) - tol {
            bad.push(format!("trial {trial} {p} dBm"));
        }
    }
    for p in POWERS {
        let node4 = |s| mean_of(records, s, p, |r| r.per_node[3]);
        let mmf = node4(Mmf);
        for other in [Sstm, Plf, Ub, Ut, Utw] {
            if node4(other) > mmf {
                bad.push(format!("{p} dBm: node 4 mean under {other} {:.4} > mmf {mmf:.4}", node4(other)));
            }
        }
        let jain = |s| mean_of(records, s, p, |r| r.jain);
        let (jm, jp, js) = (jain(Mmf), jain(Plf), jain(Sstm));
        if !(jm >= jp && jp >= js) {
            bad.push(format!("{p} dBm: jain mmf {jm:.4} plf {jp:.4} sstm {js:.4}"));
        }
    }
    let detail = if bad.is_empty() {
        let j: Vec<String> = POWERS
            .iter()
            .map(|&p| {
                format!(
                    "{p}dBm {:.3}/{:.3}/{:.3}",
                    mean_of(records, Mmf, p, |r| r.jain),
                    mean_of(records, Plf, p, |r| r.jain),
                    mean_of(records, Sstm, p, |r| r.jain)
                )
            })
            .collect();
        format!("{checked} all-active trials ordered; jain mmf/plf/sstm {}", j.join(", "))
    } else {
        format!("{checked} all-active trials; {}", bad.join("; "))
    };
    Outcome::new(bad.is_empty() && checked > 0, detail)
}

fn criterion_determinism() -> Outcome {
    let mut cfg = reference(Fading::Rician { k_factor: 10.0 }, 8);
    cfg.p_h_dbm = OneOrMany::Many(vec![0.0, 20.0, 40.0]);
    let csv = || {
        let records = run_experiment(&cfg).expect("experiment");
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).expect("csv");
        buf
    };
    let (a, b) = (csv(), csv());
    Outcome::new(!a.is_empty() && a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let (c1, c8) = criterion_blinding();
    results.push((1, "blinding optimality", c1));
    results.push((2, "inner KKT certificates", criterion_kkt()));
    results.push((3, "oracle equivalence", criterion_oracle()));
    results.push((4, "gradient fidelity", criterion_gradients()));
    results.push((5, "concavity probe", criterion_concavity()));

    let start = Instant::now();
    let rayleigh = run_experiment(&reference(Fading::Rayleigh, 200)).expect("rayleigh experiment");
    let rician = run_experiment(&reference(Fading::Rician { k_factor: 10.0 }, 200)).expect("rician experiment");
    let secs = start.elapsed().as_secs_f64();
    results.push((6, "baseline ordering", criterion_baselines(&rayleigh, &rician, secs)));
    let mut c7 = criterion_fairness(&rayleigh);
    let c7b = criterion_fairness(&rician);
    c7 = Outcome::new(c7.pass && c7b.pass, format!("rayleigh: {}; rician: {}", c7.detail, c7b.detail));
    results.push((7, "fairness orderings", c7));
    results.push((8, "removal-round bound", c8));
    results.push((9, "determinism", criterion_determinism()));

    results.sort_by_key(|r| r.0);
    for (n, name, o) in &results {
        println!("criterion {n} ({name}): {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if results.iter().all(|r| r.2.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
