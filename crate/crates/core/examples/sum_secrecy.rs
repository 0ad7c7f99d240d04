//! Maximizes the sum secrecy throughput of the reference layout.

use wpcn_secrecy::sstm::optimize;
use wpcn_secrecy::{blind_all, draw_channels, Fading, Scenario, SolverConfig};

fn main() -> wpcn_secrecy::Result<()> {
    let mut s = Scenario::reference(Fading::Rician { k_factor: 10.0 }, 1);
    s.p_h_dbm = 20.0;
    let ch = draw_channels(&s)?;
    let p_h = s.p_h_watts();
    let blinding = blind_all(&ch, p_h)?;
    let (alloc, report) = optimize(&ch, &blinding, p_h, &SolverConfig::default())?;

    println!("energy slot {:.4}", alloc.tau[0]);
    for (i, d) in report.per_node.iter().enumerate() {
        println!("slot {i}: tau {:.4}  E0 {:.3e}  D {:.4} nats", alloc.tau[i + 1], alloc.e0[i], d);
    }
    println!(
        "sum {:.4} nats after {} iterations (converged: {}, budget residual {:.1e})",
        report.objective, report.iterations, report.converged, report.budget_residual
    );
    Ok(())
}
