//! A short Monte Carlo sweep over the base-station power, summarized per
//! solver and written to CSV.

use wpcn_secrecy::harness::{emit, run_experiment, summarize, ExperimentConfig};
use wpcn_secrecy::Fading;

fn main() -> wpcn_secrecy::Result<()> {
    let cfg = ExperimentConfig::reference(Fading::Rayleigh, 20, 1);
    let records = run_experiment(&cfg)?;
    for row in summarize(&records) {
        println!(
            "{:>4} {:>4} dBm  sum {:7.3} ± {:.3}  min {:6.3}  jain {:.3}",
            row.solver.to_string(),
            row.p_h_dbm,
            row.mean_sum,
            row.ci95_sum,
            row.mean_min,
            row.mean_jain
        );
    }
    let out = std::env::temp_dir().join("wpcn_power_sweep.csv");
    emit(&records, &out, None)?;
    println!("wrote {}", out.display());
    Ok(())
}
