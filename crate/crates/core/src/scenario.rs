//! Problem instances: node geometry, path loss and block-fading draws.
//!
//! The base station sits at the origin. Every link gets its own ChaCha
//! stream derived from the master seed and the link identity, so adding or
//! removing a node leaves the draws of all other links untouched.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node-to-node distances are floored here so co-located nodes keep a finite gain.
pub const MIN_NODE_DISTANCE_M: f64 = 1e-2;

/// Converts a power in dBm to watts.
pub fn to_linear(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    /// Radius in meters.
    pub r: f64,
    /// Angle in radians.
    pub theta: f64,
}

impl Polar {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    fn cartesian(self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }

    pub fn distance(self, other: Polar) -> f64 {
        let (x0, y0) = self.cartesian();
        let (x1, y1) = other.cartesian();
        (x0 - x1).hypot(y0 - y1)
    }
}

/// Small-scale fading model of the base-station links. Node-to-node links
/// are always Rayleigh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Fading {
    Rayleigh,
    /// `k_factor = inf` yields the pure line-of-sight channel.
    Rician { k_factor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nodes: Vec<Polar>,
    pub n_antennas: usize,
    pub p_h_dbm: f64,
    pub noise_dbm: f64,
    pub path_loss_exponent: f64,
    /// Energy conversion efficiency per node, in scenario order.
    pub efficiencies: Vec<f64>,
    pub fading: Fading,
    /// Force `h_cross[i][j] == h_cross[j][i]`.
    #[serde(default)]
    pub reciprocal_cross: bool,
    pub seed: u64,
}

impl Scenario {
    /// Four-node asymmetric layout used in the reference study.
    pub fn reference(fading: Fading, seed: u64) -> Self {
        use std::f64::consts::PI;
        Self {
            nodes: vec![
                Polar::new(1.8, 0.0),
                Polar::new(2.0, PI / 4.0),
                Polar::new(2.2, PI / 2.0),
                Polar::new(5.0, 3.0 * PI / 4.0),
            ],
            n_antennas: 50,
            p_h_dbm: 10.0,
            noise_dbm: -100.0,
            path_loss_exponent: 3.0,
            efficiencies: vec![1.0; 4],
            fading,
            reciprocal_cross: false,
            seed,
        }
    }

    /// Random geometry for verification runs: `k` nodes uniformly placed in
    /// the annulus 1.5 m to 5 m, Rayleigh fading, unit efficiency.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, k: usize, n_antennas: usize) -> Self {
        let nodes = (0..k)
            .map(|_| {
                let r = rng.random_range(1.5..5.0);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                Polar::new(r, theta)
            })
            .collect();
        Self {
            nodes,
            n_antennas,
            p_h_dbm: rng.random_range(0.0..40.0),
            noise_dbm: -100.0,
            path_loss_exponent: 3.0,
            efficiencies: vec![1.0; k],
            fading: Fading::Rayleigh,
            reciprocal_cross: false,
            seed: rng.random(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn p_h_watts(&self) -> f64 {
        to_linear(self.p_h_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::TooFewNodes { need: 1, got: 0 });
        }
        if self.n_antennas == 0 {
            return Err(Error::InvalidScenario("n_antennas must be at least 1".into()));
        }
        if let Some(p) = self.nodes.iter().find(|p| !(p.r > 0.0) || !p.theta.is_finite()) {
            return Err(Error::InvalidScenario(format!("bad node position {p:?}")));
        }
        if self.efficiencies.len() != self.nodes.len() {
            return Err(Error::InvalidScenario(format!(
                "{} efficiencies for {} nodes",
                self.efficiencies.len(),
                self.nodes.len()
            )));
        }
        if self.efficiencies.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidScenario("efficiencies must lie in [0, 1]".into()));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidScenario("path loss exponent must be positive".into()));
        }
        if !self.noise_dbm.is_finite() || !self.p_h_dbm.is_finite() {
            return Err(Error::InvalidScenario("powers must be finite".into()));
        }
        if let Fading::Rician { k_factor } = self.fading {
            if !(k_factor >= 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "Rician K factor must be non-negative, got {k_factor}"
                )));
            }
        }
        Ok(())
    }
}

/// Identifies one physical link for sub-stream derivation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    Downlink(usize),
    Uplink(usize),
    Cross(usize, usize),
}

impl Link {
    fn stream_id(self) -> u64 {
        let (kind, a, b) = match self {
            Link::Downlink(i) => (1u64, i as u64, 0u64),
            Link::Uplink(i) => (2, i as u64, 0),
            Link::Cross(i, j) => (3, i as u64, j as u64),
        };
        (kind << 56) | ((a & 0x0fff_ffff) << 28) | (b & 0x0fff_ffff)
    }

    /// Deterministic stream for this link under `seed`.
    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream_id());
        rng
    }
}

/// Unit-variance circularly symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Unit-mean-power fading sample. The Rician line-of-sight phase is fixed at zero.
pub fn fading_sample<R: Rng + ?Sized>(fading: Fading, rng: &mut R) -> Complex64 {
    match fading {
        Fading::Rayleigh => complex_gaussian(rng),
        Fading::Rician { k_factor } if k_factor.is_infinite() => Complex64::new(1.0, 0.0),
        Fading::Rician { k_factor } => {
            let los = (k_factor / (k_factor + 1.0)).sqrt();
            let diffuse = (1.0 / (k_factor + 1.0)).sqrt();
            Complex64::new(los, 0.0) + complex_gaussian(rng) * diffuse
        }
    }
}

/// One block-fading draw with derived per-watt slopes.
///
/// Nodes are stored sorted by downlink energy gain `mu`, best first; `order[k]`
/// gives the scenario index of sorted node `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// Downlink vectors, base station to node.
    pub g: Vec<Vec<Complex64>>,
    /// Uplink scalars, node to the receiving antenna.
    pub h: Vec<Complex64>,
    /// `h_cross[i][j]`: node i to node j, zero diagonal.
    pub h_cross: Vec<Vec<Complex64>>,
    pub noise_w: f64,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub zeta: Vec<f64>,
    pub xi_raw: Vec<Vec<f64>>,
    pub order: Vec<usize>,
}

impl ChannelRealization {
    pub fn num_nodes(&self) -> usize {
        self.mu.len()
    }

    /// `|h_ij|^2`.
    pub fn cross_gain(&self, i: usize, j: usize) -> f64 {
        self.h_cross[i][j].norm_sqr()
    }

    /// Builds a realization directly from power gains. Downlink vectors have
    /// length one. Input is re-sorted by `mu`; `order` refers to input positions.
    pub fn from_gains(
        mu: &[f64],
        uplink_gain: &[f64],
        cross_gain: &[Vec<f64>],
        noise_w: f64,
        eta: &[f64],
    ) -> Result<Self> {
        let k = mu.len();
        if uplink_gain.len() != k
            || eta.len() != k
            || cross_gain.len() != k
            || cross_gain.iter().any(|row| row.len() != k)
        {
            return Err(Error::InvalidChannels("inconsistent dimensions".into()));
        }
        let g = mu.iter().map(|m| vec![Complex64::new(m.sqrt(), 0.0)]).collect();
        let h = uplink_gain.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect();
        let h_cross = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if i == j {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(cross_gain[i][j].sqrt(), 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let ch = Self::assemble(g, h, h_cross, noise_w, eta.to_vec());
        ch.validate()?;
        Ok(ch)
    }

    fn assemble(
        g: Vec<Vec<Complex64>>,
        h: Vec<Complex64>,
        h_cross: Vec<Vec<Complex64>>,
        noise_w: f64,
        eta: Vec<f64>,
    ) -> Self {
        let k = g.len();
        let raw_mu: Vec<f64> = g.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        // Stable sort: ties keep scenario order.
        order.sort_by(|&a, &b| raw_mu[b].total_cmp(&raw_mu[a]));

        let g: Vec<_> = order.iter().map(|&o| g[o].clone()).collect();
        let h: Vec<_> = order.iter().map(|&o| h[o]).collect();
        let h_cross: Vec<Vec<_>> = order
            .iter()
            .map(|&oi| order.iter().map(|&oj| h_cross[oi][oj]).collect())
            .collect();
        let eta: Vec<_> = order.iter().map(|&o| eta[o]).collect();
        let mu: Vec<_> = order.iter().map(|&o| raw_mu[o]).collect();
        let zeta = h.iter().map(|c| c.norm_sqr() / noise_w).collect();
        let xi_raw = h_cross
            .iter()
            .map(|row| row.iter().map(|c| c.norm_sqr() / noise_w).collect())
            .collect();
        Self { g, h, h_cross, noise_w, eta, mu, zeta, xi_raw, order }
    }

    /// Checks dimensions, positivity and the sorting rule. Used on
    /// realizations read from disk.
    pub fn validate(&self) -> Result<()> {
        let k = self.mu.len();
        if k == 0 {
            return Err(Error::TooFewNodes { need: 1, got: 0 });
        }
        let dims_ok = self.g.len() == k
            && self.h.len() == k
            && self.eta.len() == k
            && self.zeta.len() == k
            && self.order.len() == k
            && self.h_cross.len() == k
            && self.h_cross.iter().all(|r| r.len() == k)
            && self.xi_raw.len() == k
            && self.xi_raw.iter().all(|r| r.len() == k);
        if !dims_ok {
            return Err(Error::InvalidChannels("inconsistent dimensions".into()));
        }
        if !(self.noise_w > 0.0) {
            return Err(Error::InvalidChannels("noise power must be positive".into()));
        }
        if self.mu.iter().chain(&self.zeta).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidChannels("mu and zeta must be positive and finite".into()));
        }
        if (0..k).any(|i| self.h_cross[i][i] != Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidChannels("cross-gain diagonal must be zero".into()));
        }
        if self.mu.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidChannels("nodes must be sorted by mu, best first".into()));
        }
        if self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidChannels("efficiencies must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Draws one block-fading realization. Reproducible from `scenario.seed`.
pub fn draw_channels(scenario: &Scenario) -> Result<ChannelRealization> {
    draw_channels_with_seed(scenario, scenario.seed)
}

/// Same as [`draw_channels`] with an explicit seed, used for per-trial draws.
pub fn draw_channels_with_seed(scenario: &Scenario, seed: u64) -> Result<ChannelRealization> {
    scenario.validate()?;
    let k = scenario.num_nodes();
    let n = scenario.n_antennas;
    let alpha = scenario.path_loss_exponent;

    let amplitude = |d: f64| d.powf(-alpha / 2.0);

    let mut g = Vec::with_capacity(k);
    let mut h = Vec::with_capacity(k);
    for (i, node) in scenario.nodes.iter().enumerate() {
        let amp = amplitude(node.r);
        let mut rng = Link::Downlink(i).rng(seed);
        g.push((0..n).map(|_| fading_sample(scenario.fading, &mut rng) * amp).collect::<Vec<_>>());
        let mut rng = Link::Uplink(i).rng(seed);
        h.push(fading_sample(scenario.fading, &mut rng) * amp);
    }

    let mut h_cross = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j || (scenario.reciprocal_cross && j < i) {
                continue;
            }
            let d = scenario.nodes[i].distance(scenario.nodes[j]).max(MIN_NODE_DISTANCE_M);
            let mut rng = Link::Cross(i, j).rng(seed);
            h_cross[i][j] = fading_sample(Fading::Rayleigh, &mut rng) * amplitude(d);
        }
    }
    if scenario.reciprocal_cross {
        for i in 0..k {
            for j in 0..i {
                h_cross[i][j] = h_cross[j][i];
            }
        }
    }

    let noise_w = to_linear(scenario.noise_dbm);
    let ch = ChannelRealization::assemble(g, h, h_cross, noise_w, scenario.efficiencies.clone());
    ch.validate()?;
    Ok(ch)
}
