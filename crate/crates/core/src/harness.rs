//! Monte Carlo experiments: power sweeps over independent channel draws,
//! one record per (trial, power, solver), CSV and JSON output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineKind};
use crate::blinding::{blind_all, BlindingMatrix};
use crate::error::{Error, Result};
use crate::fairness::{mmf_optimize, plf_optimize};
use crate::report::SolveReport;
use crate::scenario::{draw_channels_with_seed, to_linear, ChannelRealization, Fading, Polar, Scenario};
use crate::sstm::{optimize, SolverConfig};

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "WPCN_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Sstm,
    Mmf,
    Plf,
    Utw,
    Ut,
    Ub,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] =
        [SolverKind::Sstm, SolverKind::Mmf, SolverKind::Plf, SolverKind::Utw, SolverKind::Ut, SolverKind::Ub];

    fn needs_blinding(self) -> bool {
        matches!(self, SolverKind::Sstm | SolverKind::Mmf | SolverKind::Plf)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Sstm => "sstm",
            SolverKind::Mmf => "mmf",
            SolverKind::Plf => "plf",
            SolverKind::Utw => "utw",
            SolverKind::Ut => "ut",
            SolverKind::Ub => "ub",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown solver {s:?}")))
    }
}

/// A scalar applied everywhere or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn all_solvers() -> Vec<SolverKind> {
    SolverKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub nodes: Vec<Polar>,
    pub n_antennas: usize,
    /// Base-station power sweep, dBm.
    pub p_h_dbm: OneOrMany,
    pub sigma2_dbm: f64,
    pub alpha: f64,
    /// Energy conversion efficiency, shared or per node.
    pub eta: OneOrMany,
    pub fading: Fading,
    pub seed: u64,
    pub trials: usize,
    #[serde(default = "all_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub reciprocal_cross: bool,
    /// Record wall time per solve. Off by default so output is reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    /// The four-node reference study swept over 0 to 40 dBm.
    pub fn reference(fading: Fading, trials: usize, seed: u64) -> Self {
        let s = Scenario::reference(fading, seed);
        Self {
            nodes: s.nodes,
            n_antennas: s.n_antennas,
            p_h_dbm: OneOrMany::Many(vec![0.0, 10.0, 20.0, 30.0, 40.0]),
            sigma2_dbm: s.noise_dbm,
            alpha: s.path_loss_exponent,
            eta: OneOrMany::One(1.0),
            fading,
            seed,
            trials,
            solvers: all_solvers(),
            reciprocal_cross: false,
            timing: false,
            solver: SolverConfig::default(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep(&self) -> Vec<f64> {
        self.p_h_dbm.to_vec()
    }

    pub fn efficiencies(&self) -> Result<Vec<f64>> {
        let k = self.nodes.len();
        match &self.eta {
            OneOrMany::One(x) => Ok(vec![*x; k]),
            OneOrMany::Many(v) if v.len() == k => Ok(v.clone()),
            OneOrMany::Many(v) => {
                Err(Error::InvalidScenario(format!("{} efficiencies for {k} nodes", v.len())))
            }
        }
    }

    /// Scenario at one sweep point.
    pub fn scenario(&self, p_h_dbm: f64) -> Result<Scenario> {
        let s = Scenario {
            nodes: self.nodes.clone(),
            n_antennas: self.n_antennas,
            p_h_dbm,
            noise_dbm: self.sigma2_dbm,
            path_loss_exponent: self.alpha,
            efficiencies: self.efficiencies()?,
            fading: self.fading,
            reciprocal_cross: self.reciprocal_cross,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidScenario("trials must be at least 1".into()));
        }
        let sweep = self.sweep();
        if sweep.is_empty() || sweep.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidScenario("power sweep must be a nonempty list of finite values".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidScenario("solver list is empty".into()));
        }
        self.scenario(sweep[0]).map(|_| ())
    }
}

/// Seed of trial `trial`, reproducible from the base seed alone.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub trial: usize,
    pub seed: u64,
    pub p_h_dbm: f64,
    pub solver: SolverKind,
    /// Secrecy throughput per node in scenario order, nats.
    pub per_node: Vec<f64>,
    pub sum: f64,
    pub min: f64,
    pub log_sum: f64,
    pub jain: f64,
    /// Set when every throughput is zero and `jain` defaults to one.
    pub jain_degenerate: bool,
    pub iterations: usize,
    pub ms: f64,
    pub converged: bool,
    pub all_active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    fn from_report(trial: usize, seed: u64, p_h_dbm: f64, solver: SolverKind, ch: &ChannelRealization, r: &SolveReport, ms: f64) -> Self {
        let mut per_node = vec![0.0; r.per_node.len()];
        for (i, &d) in r.per_node.iter().enumerate() {
            per_node[ch.order[i]] = d;
        }
        let (jain, jain_degenerate) = jain_index(&per_node);
        Self {
            trial,
            seed,
            p_h_dbm,
            solver,
            sum: per_node.iter().sum(),
            min: per_node.iter().copied().fold(f64::INFINITY, f64::min),
            log_sum: per_node.iter().map(|d| d.ln()).sum(),
            per_node,
            jain,
            jain_degenerate,
            iterations: r.iterations,
            ms,
            converged: r.converged,
            all_active: r.inactive.is_empty(),
            error: None,
        }
    }

    fn failed(trial: usize, seed: u64, p_h_dbm: f64, solver: SolverKind, err: &Error) -> Self {
        Self {
            trial,
            seed,
            p_h_dbm,
            solver,
            per_node: Vec::new(),
            sum: f64::NAN,
            min: f64::NAN,
            log_sum: f64::NAN,
            jain: f64::NAN,
            jain_degenerate: false,
            iterations: 0,
            ms: 0.0,
            converged: false,
            all_active: false,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// `(sum x)^2 / (K sum x^2)`. All-zero input gives `(1, true)`.
pub fn jain_index(x: &[f64]) -> (f64, bool) {
    let s: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if x.is_empty() || sq == 0.0 {
        return (1.0, true);
    }
    (s * s / (x.len() as f64 * sq), false)
}

fn run_solver(
    kind: SolverKind,
    ch: &ChannelRealization,
    blinding: Option<&BlindingMatrix>,
    p_h: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let blinding = || blinding.ok_or_else(|| Error::InvalidArgument("missing blinding".into()));
    Ok(match kind {
        SolverKind::Sstm => optimize(ch, blinding()?, p_h, cfg)?.1,
        SolverKind::Mmf => mmf_optimize(ch, blinding()?, p_h, cfg)?.1,
        SolverKind::Plf => plf_optimize(ch, blinding()?, p_h, cfg)?.1,
        SolverKind::Utw => run_baseline(BaselineKind::Utw, ch, p_h, cfg)?.1,
        SolverKind::Ut => run_baseline(BaselineKind::Ut, ch, p_h, cfg)?.1,
        SolverKind::Ub => run_baseline(BaselineKind::Ub, ch, p_h, cfg)?.1,
    })
}

fn run_trial(cfg: &ExperimentConfig, base: &Scenario, trial: usize) -> Vec<ResultRecord> {
    let seed = trial_seed(cfg.seed, trial);
    let mut out = Vec::new();
    let ch = match draw_channels_with_seed(base, seed) {
        Ok(ch) => ch,
        Err(e) => {
            for p in cfg.sweep() {
                for &s in &cfg.solvers {
                    out.push(ResultRecord::failed(trial, seed, p, s, &e));
                }
            }
            return out;
        }
    };
    for p_dbm in cfg.sweep() {
        let p_h = to_linear(p_dbm);
        let blinding = if cfg.solvers.iter().any(|s| s.needs_blinding()) { Some(blind_all(&ch, p_h)) } else { None };
        for &solver in &cfg.solvers {
            let start = Instant::now();
            let res = match (&blinding, solver.needs_blinding()) {
                (Some(Err(e)), true) => Err(Error::InvalidArgument(format!("blinding failed: {e}"))),
                (Some(Ok(b)), true) => run_solver(solver, &ch, Some(b), p_h, &cfg.solver),
                _ => run_solver(solver, &ch, None, p_h, &cfg.solver),
            };
            let ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            out.push(match res {
                Ok(r) => ResultRecord::from_report(trial, seed, p_dbm, solver, &ch, &r, ms),
                Err(e) => {
                    eprintln!("trial {trial}, {p_dbm} dBm, {solver}: {e}");
                    ResultRecord::failed(trial, seed, p_dbm, solver, &e)
                }
            });
        }
    }
    out
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every (trial, power, solver) combination. Records come back sorted by
/// trial, then sweep position, then solver order in the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let base = cfg.scenario(cfg.sweep()[0])?;
    let work = || -> Vec<ResultRecord> {
        (0..cfg.trials).into_par_iter().flat_map_iter(|t| run_trial(cfg, &base, t)).collect()
    };
    let records = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(records)
}

/// One CSV row: a single node of a single record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub trial: usize,
    pub seed: u64,
    pub p_h_dbm: f64,
    pub solver: SolverKind,
    pub node: Option<usize>,
    pub throughput_nats: Option<f64>,
    pub throughput_bits: Option<f64>,
    pub sum_nats: Option<f64>,
    pub min_nats: Option<f64>,
    pub logsum_nats: Option<f64>,
    pub jain: Option<f64>,
    pub iters: Option<usize>,
    pub ms: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "trial",
    "seed",
    "p_h_dbm",
    "solver",
    "node",
    "throughput_nats",
    "throughput_bits",
    "sum_nats",
    "min_nats",
    "logsum_nats",
    "jain",
    "iters",
    "ms",
];

/// Flattens records to rows; failed records keep one row with empty values.
pub fn to_rows(records: &[ResultRecord]) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for r in records {
        let blank = CsvRow {
            trial: r.trial,
            seed: r.seed,
            p_h_dbm: r.p_h_dbm,
            solver: r.solver,
            node: None,
            throughput_nats: None,
            throughput_bits: None,
            sum_nats: None,
            min_nats: None,
            logsum_nats: None,
            jain: None,
            iters: None,
            ms: None,
        };
        if !r.is_ok() {
            rows.push(blank);
            continue;
        }
        for (node, &d) in r.per_node.iter().enumerate() {
            rows.push(CsvRow {
                node: Some(node),
                throughput_nats: Some(d),
                throughput_bits: Some(d / std::f64::consts::LN_2),
                sum_nats: Some(r.sum),
                min_nats: Some(r.min),
                logsum_nats: Some(r.log_sum),
                jain: Some(r.jain),
                iters: Some(r.iterations),
                ms: Some(r.ms),
                ..blank.clone()
            });
        }
    }
    rows
}

pub fn write_csv<W: std::io::Write>(records: &[ResultRecord], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_COLUMNS)?;
    for row in to_rows(records) {
        wr.serialize(row)?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::InvalidArgument(format!("unexpected CSV header {header:?}")));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub solver: SolverKind,
    pub p_h_dbm: f64,
    pub trials: usize,
    pub failures: usize,
    pub mean_sum: f64,
    pub ci95_sum: f64,
    pub mean_min: f64,
    pub ci95_min: f64,
    pub mean_jain: f64,
    pub ci95_jain: f64,
}

/// Mean and normal-approximation 95% half width.
pub fn mean_ci(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Groups records by (solver, power); key order follows `solver`, then power.
fn grouped(records: &[ResultRecord]) -> BTreeMap<(SolverKind, i64), Vec<&ResultRecord>> {
    let mut groups: BTreeMap<(SolverKind, i64), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.solver, (r.p_h_dbm * 1e6).round() as i64)).or_default().push(r);
    }
    groups
}

pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    grouped(records)
        .into_values()
        .map(|rs| {
            let ok: Vec<&ResultRecord> = rs.iter().copied().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&ResultRecord) -> f64| mean_ci(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mean_sum, ci95_sum) = col(|r| r.sum);
            let (mean_min, ci95_min) = col(|r| r.min);
            let (mean_jain, ci95_jain) = col(|r| r.jain);
            SummaryRow {
                solver: rs[0].solver,
                p_h_dbm: rs[0].p_h_dbm,
                trials: ok.len(),
                failures: rs.len() - ok.len(),
                mean_sum,
                ci95_sum,
                mean_min,
                ci95_min,
                mean_jain,
                ci95_jain,
            }
        })
        .collect()
}

/// Mean throughput of each node for one (solver, power) pair over successful records.
pub fn node_means(records: &[ResultRecord], solver: SolverKind, p_h_dbm: f64) -> Vec<f64> {
    let rs: Vec<&ResultRecord> =
        records.iter().filter(|r| r.solver == solver && r.p_h_dbm == p_h_dbm && r.is_ok()).collect();
    let k = rs.first().map_or(0, |r| r.per_node.len());
    (0..k).map(|i| rs.iter().map(|r| r.per_node[i]).sum::<f64>() / rs.len() as f64).collect()
}

/// Records sharing (trial, power) where the fair and sum solvers order
/// incorrectly: sum(SSTM) >= sum(PLF) >= sum(MMF) and
/// min(MMF) >= min(PLF) >= min(SSTM), each up to `tol`. Only trials where
/// every node is active under all three solvers are checked.
pub fn dominance_violations(records: &[ResultRecord], tol: f64) -> Vec<String> {
    let mut by_point: BTreeMap<(usize, i64), BTreeMap<SolverKind, &ResultRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        by_point.entry((r.trial, (r.p_h_dbm * 1e6).round() as i64)).or_default().insert(r.solver, r);
    }
    let mut out = Vec::new();
    for ((trial, _), m) in by_point {
        let (Some(s), Some(f), Some(p)) = (m.get(&SolverKind::Sstm), m.get(&SolverKind::Mmf), m.get(&SolverKind::Plf))
        else {
            continue;
        };
        if !(s.all_active && f.all_active && p.all_active) {
            continue;
        }
        let at = format!("trial {trial}, {} dBm", s.p_h_dbm);
        let checks = [
            ("sum sstm >= plf", s.sum, p.sum),
            ("sum plf >= mmf", p.sum, f.sum),
            ("min mmf >= plf", f.min, p.min),
            ("min plf >= sstm", p.min, s.min),
        ];
        for (what, hi, lo) in checks {
            if hi < lo - tol {
                out.push(format!("{at}: {what} violated ({hi} < {lo})"));
            }
        }
    }
    out
}

pub fn summary_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    csv_path.with_file_name(format!("{stem}.summary.csv"))
}

/// Writes the per-node CSV, its summary next to it and, optionally, a JSON mirror.
pub fn emit(records: &[ResultRecord], csv_path: &Path, json_path: Option<&Path>) -> Result<()> {
    let file = fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(csv_path, source),
        other => other,
    })?;

    let spath = summary_path(csv_path);
    let file = fs::File::create(&spath).map_err(|e| Error::io(&spath, e))?;
    let mut wr = csv::Writer::from_writer(file);
    for row in summarize(records) {
        wr.serialize(row)?;
    }
    wr.flush().map_err(|e| Error::io(&spath, e))?;

    if let Some(jp) = json_path {
        let mut file = fs::File::create(jp).map_err(|e| Error::io(jp, e))?;
        serde_json::to_writer_pretty(&mut file, records)?;
        file.write_all(b"\n").map_err(|e| Error::io(jp, e))?;
    }
    Ok(())
}
