//! Splits each information slot's beam among the listening nodes so the
//! strongest eavesdropper is as weak as possible.

use wpcn_secrecy::{blind_all, draw_channels, Fading, Scenario};

fn main() -> wpcn_secrecy::Result<()> {
    let s = Scenario::reference(Fading::Rayleigh, 3);
    let ch = draw_channels(&s)?;
    let b = blind_all(&ch, s.p_h_watts())?;
    for (i, row) in b.weights.iter().enumerate() {
        let w: Vec<String> = row.iter().map(|a| format!("{a:.3}")).collect();
        println!("slot {i}: weights [{}]  worst slope {:.3e}  removals {}", w.join(", "), b.xi_star[i], b.iterations[i]);
    }
    println!("equal-slope residual {:.1e}", b.kkt_residual(&ch, s.p_h_watts()));
    Ok(())
}
