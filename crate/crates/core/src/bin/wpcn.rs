use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use wpcn_secrecy::fairness::{mmf_optimize, plf_optimize};
use wpcn_secrecy::harness::{emit, run_experiment, ExperimentConfig};
use wpcn_secrecy::sstm::optimize;
use wpcn_secrecy::validation::{validate, Tolerances};
use wpcn_secrecy::{
    blind_all, draw_channels, to_linear, Allocation, BlindingMatrix, ChannelRealization, Error, Fading, Objective,
    Scenario, SolveReport, SolverConfig,
};

#[derive(Parser)]
#[command(name = "wpcn", version, about = "Secrecy-throughput optimization for full-duplex wireless powered networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write per-node results as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Solve one channel realization and print the allocation as JSON.
    Solve {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, default_value = "sstm")]
        objective: Objective,
        #[arg(long = "p-h-dbm", allow_hyphen_values = true)]
        p_h_dbm: f64,
    },
    /// Check every solver against the oracle on random instances.
    Validate {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Draw a channel realization of the reference layout, or of a scenario file.
    Draw {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Rician K-factor; Rayleigh when omitted.
        #[arg(long)]
        k_factor: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct SolveOutput {
    blinding: BlindingMatrix,
    allocation: Allocation,
    report: SolveReport,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn solve(channels: &Path, objective: Objective, p_h_dbm: f64) -> Result<(), Error> {
    let ch: ChannelRealization = read_json(channels)?;
    let p_h = to_linear(p_h_dbm);
    let cfg = SolverConfig::default();
    let blinding = blind_all(&ch, p_h)?;
    let (allocation, report) = match objective {
        Objective::Sstm => optimize(&ch, &blinding, p_h, &cfg)?,
        Objective::Mmf => mmf_optimize(&ch, &blinding, p_h, &cfg)?,
        Objective::Plf => plf_optimize(&ch, &blinding, p_h, &cfg)?,
    };
    write_json(&SolveOutput { blinding, allocation, report }, None)
}

fn draw(scenario: Option<&Path>, seed: u64, k_factor: Option<f64>, out: Option<&Path>) -> Result<(), Error> {
    let mut s = match scenario {
        Some(p) => read_json::<Scenario>(p)?,
        None => Scenario::reference(Fading::Rayleigh, seed),
    };
    s.seed = seed;
    if let Some(k) = k_factor {
        s.fading = Fading::Rician { k_factor: k };
    }
    s.validate()?;
    write_json(&draw_channels(&s)?, out)
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Io { .. } => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Run { config, out, json } => ExperimentConfig::from_json_file(&config)
            .and_then(|cfg| run_experiment(&cfg))
            .and_then(|records| emit(&records, &out, json.as_deref())),
        Command::Solve { channels, objective, p_h_dbm } => solve(&channels, objective, p_h_dbm),
        Command::Validate { instances, seed } => {
            let report = validate(instances, seed, &Tolerances::default());
            if let Err(e) = write_json(&report, None) {
                return exit_for(&e);
            }
            if !report.passed {
                let failed = report.instances.iter().filter(|c| !c.passed()).count();
                eprintln!("validation failed on {failed} of {instances} instances");
                return ExitCode::from(2);
            }
            Ok(())
        }
        Command::Draw { scenario, seed, k_factor, out } => draw(scenario.as_deref(), seed, k_factor, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
