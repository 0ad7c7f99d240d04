//! Draws the reference layout under Rayleigh and Rician fading and prints
//! the per-watt slopes the solvers work with.

use wpcn_secrecy::{draw_channels, Fading, Scenario};

fn main() -> wpcn_secrecy::Result<()> {
    for fading in [Fading::Rayleigh, Fading::Rician { k_factor: 10.0 }] {
        let ch = draw_channels(&Scenario::reference(fading, 7))?;
        println!("{fading:?}");
        for i in 0..ch.num_nodes() {
            println!("  slot {i} (node {}): mu {:.3e}  zeta {:.3e}", ch.order[i] + 1, ch.mu[i], ch.zeta[i]);
        }
    }
    Ok(())
}
