//! The uniform reference schemes against the optimized sum.

use wpcn_secrecy::baselines::{run_baseline, BaselineKind};
use wpcn_secrecy::sstm::optimize;
use wpcn_secrecy::{blind_all, draw_channels, to_linear, Fading, Scenario, SolverConfig};

fn main() -> wpcn_secrecy::Result<()> {
    let ch = draw_channels(&Scenario::reference(Fading::Rayleigh, 5))?;
    let cfg = SolverConfig::default();
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "dBm", "sstm", "ub", "ut", "utw");
    for dbm in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let p_h = to_linear(dbm);
        let sstm = optimize(&ch, &blind_all(&ch, p_h)?, p_h, &cfg)?.1.objective;
        let mut row = format!("{dbm:>6} {sstm:>8.3}");
        for kind in [BaselineKind::Ub, BaselineKind::Ut, BaselineKind::Utw] {
            let r = run_baseline(kind, &ch, p_h, &cfg)?.1;
            row += &format!(" {:>8.3}", r.per_node.iter().sum::<f64>());
        }
        println!("{row}");
    }
    Ok(())
}
