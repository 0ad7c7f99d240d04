//! Sum, max-min and proportional-fair allocations side by side.

use wpcn_secrecy::fairness::{mmf_optimize, plf_optimize};
use wpcn_secrecy::harness::jain_index;
use wpcn_secrecy::sstm::optimize;
use wpcn_secrecy::{blind_all, draw_channels, Fading, Scenario, SolverConfig};

fn main() -> wpcn_secrecy::Result<()> {
    let s = Scenario::reference(Fading::Rayleigh, 11);
    let ch = draw_channels(&s)?;
    let p_h = s.p_h_watts();
    let b = blind_all(&ch, p_h)?;
    let cfg = SolverConfig::default();

    let runs = [
        ("sum", optimize(&ch, &b, p_h, &cfg)?.1),
        ("max-min", mmf_optimize(&ch, &b, p_h, &cfg)?.1),
        ("prop-fair", plf_optimize(&ch, &b, p_h, &cfg)?.1),
    ];
    for (name, r) in &runs {
        let d: Vec<String> = r.per_node.iter().map(|x| format!("{x:7.3}")).collect();
        let sum: f64 = r.per_node.iter().sum();
        println!("{name:>9}: [{}]  sum {sum:.3}  jain {:.3}", d.join(" "), jain_index(&r.per_node).0);
    }
    Ok(())
}
