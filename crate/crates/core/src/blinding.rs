//! Stage one: artificial-noise beamforming during the information slots.
//!
//! In slot `i` the base station splits its energy beam over the listening
//! nodes so that the strongest eavesdropping slope
//! `xi_{i,j} = |h_ij|^2 / (sigma^2 + mu_j a_{i,j} P_H)` is as small as possible.
//! The minimizer equalizes `xi_{i,j}` over an active set and gives zero weight
//! to every node whose unjammed slope is already below that level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ChannelRealization;

/// Computed weights below `-NEGATIVE_WEIGHT_TOL` leave the active set; values
/// between that and zero are clamped in place.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotBlinding {
    pub weights: Vec<f64>,
    pub xi: f64,
    /// Nodes receiving positive weight.
    pub active_set: Vec<usize>,
    pub removals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlindingMatrix {
    /// `weights[i][j] = a_{i,j}`, the share of slot `i` beamed at node `j`.
    pub weights: Vec<Vec<f64>>,
    /// Worst-case eavesdropper slope per slot, 1/W.
    pub xi_star: Vec<f64>,
    pub active_sets: Vec<Vec<usize>>,
    pub iterations: Vec<usize>,
}

/// `|h_ij|^2 / (sigma^2 + mu_j a P_H)`.
pub fn eavesdropper_slope(channels: &ChannelRealization, i: usize, j: usize, a: f64, p_h: f64) -> f64 {
    channels.cross_gain(i, j) / (channels.noise_w + channels.mu[j] * a * p_h)
}

/// Worst-case slope of slot `i` under an arbitrary weight row.
pub fn worst_slope(channels: &ChannelRealization, i: usize, row: &[f64], p_h: f64) -> f64 {
    (0..channels.num_nodes())
        .filter(|&j| j != i)
        .map(|j| eavesdropper_slope(channels, i, j, row[j], p_h))
        .fold(0.0, f64::max)
}

/// Optimal weight row for information slot `i`.
pub fn blind_slot(i: usize, channels: &ChannelRealization, p_h: f64) -> Result<SlotBlinding> {
    let k = channels.num_nodes();
    if k < 2 {
        return Err(Error::TooFewNodes { need: 2, got: k });
    }
    if i >= k {
        return Err(Error::InvalidArgument(format!("slot {i} out of range for {k} nodes")));
    }
    if !(p_h > 0.0) {
        return Err(Error::InvalidArgument(format!("base-station power {p_h} must be positive")));
    }
    let sigma2 = channels.noise_w;
    let mut set: Vec<usize> = (0..k).filter(|&j| j != i).collect();
    let mut weights = vec![0.0; k];
    let mut removals = 0;

    'outer: loop {
        let inv_mu: f64 = set.iter().map(|&l| 1.0 / channels.mu[l]).sum();
        let weighted: f64 = set.iter().map(|&l| channels.cross_gain(i, l) / channels.mu[l]).sum();
        for (pos, &j) in set.iter().enumerate() {
            let gain = channels.cross_gain(i, j);
            let a = if gain > 0.0 {
                (1.0 + sigma2 / p_h * (inv_mu - weighted / gain)) / (channels.mu[j] / gain * weighted)
            } else {
                f64::NEG_INFINITY
            };
            // A single remaining eavesdropper always takes the whole beam.
            if a < -NEGATIVE_WEIGHT_TOL && set.len() > 1 {
                weights[j] = 0.0;
                set.remove(pos);
                removals += 1;
                continue 'outer;
            }
            weights[j] = a.max(0.0);
        }
        break;
    }
    if set.len() == 1 {
        weights[set[0]] = 1.0;
    }

    let xi = worst_slope(channels, i, &weights, p_h);
    let active_set = set.into_iter().filter(|&j| weights[j] > 0.0).collect();
    Ok(SlotBlinding { weights, xi, active_set, removals })
}

/// Runs [`blind_slot`] for every slot. A single node has nobody to blind: its
/// row is all zero and its slope is zero.
pub fn blind_all(channels: &ChannelRealization, p_h: f64) -> Result<BlindingMatrix> {
    let k = channels.num_nodes();
    if k == 1 {
        return Ok(BlindingMatrix {
            weights: vec![vec![0.0]],
            xi_star: vec![0.0],
            active_sets: vec![vec![]],
            iterations: vec![0],
        });
    }
    let mut out = BlindingMatrix {
        weights: Vec::with_capacity(k),
        xi_star: Vec::with_capacity(k),
        active_sets: Vec::with_capacity(k),
        iterations: Vec::with_capacity(k),
    };
    for i in 0..k {
        let row = blind_slot(i, channels, p_h)?;
        out.weights.push(row.weights);
        out.xi_star.push(row.xi);
        out.active_sets.push(row.active_set);
        out.iterations.push(row.removals);
    }
    Ok(out)
}

impl BlindingMatrix {
    /// Equal split over all `K` nodes, the transmitter included
    /// (its share is wasted).
    pub fn uniform(channels: &ChannelRealization, p_h: f64) -> Self {
        let k = channels.num_nodes();
        let share = 1.0 / k as f64;
        let weights: Vec<Vec<f64>> = vec![vec![share; k]; k];
        let xi_star = (0..k).map(|i| worst_slope(channels, i, &weights[i], p_h)).collect();
        Self {
            weights,
            xi_star,
            active_sets: (0..k).map(|i| (0..k).filter(|&j| j != i).collect()).collect(),
            iterations: vec![0; k],
        }
    }

    /// Largest violation of the equal-slope structure, relative to `xi_i`:
    /// active nodes must sit exactly at `xi_i`, excluded nodes must not exceed it.
    pub fn kkt_residual(&self, channels: &ChannelRealization, p_h: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.weights.iter().enumerate() {
            let xi = self.xi_star[i];
            if xi == 0.0 {
                continue;
            }
            for (j, &a) in row.iter().enumerate() {
                if j == i {
                    continue;
                }
                let slope = eavesdropper_slope(channels, i, j, a, p_h);
                let r = if a > 0.0 { (slope - xi).abs() / xi } else { ((slope - xi) / xi).max(0.0) };
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Row sums minus one, diagonal entries, and negative entries, whichever is largest.
    pub fn simplex_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.weights.iter().enumerate() {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            worst = worst.max(row[i].abs());
            worst = worst.max(row.iter().fold(0.0, |m, &a| m.max(-a)));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{draw_channels, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channels(mu: &[f64], cross: &[Vec<f64>]) -> ChannelRealization {
        let k = mu.len();
        ChannelRealization::from_gains(mu, &vec![1e-10; k], cross, 1e-13, &vec![1.0; k]).unwrap()
    }

    #[test]
    fn two_nodes_take_full_weight() {
        let ch = channels(&[2.0, 1.0], &[vec![0.0, 3e-9], vec![5e-9, 0.0]]);
        let p_h = 0.01;
        let row = blind_slot(0, &ch, p_h).unwrap();
        assert_eq!(row.weights, vec![0.0, 1.0]);
        let expect = ch.cross_gain(0, 1) / (ch.noise_w + ch.mu[1] * p_h);
        assert!((row.xi - expect).abs() <= 1e-15 * expect);
        assert_eq!(row.removals, 0);
        let m = blind_all(&ch, p_h).unwrap();
        assert_eq!(m.weights[1], vec![1.0, 0.0]);
    }

    #[test]
    fn symmetric_eavesdroppers_split_evenly() {
        let ch = channels(
            &[3.0, 1.0, 1.0],
            &[vec![0.0, 2e-9, 2e-9], vec![1e-9, 0.0, 4e-9], vec![1e-9, 4e-9, 0.0]],
        );
        let row = blind_slot(0, &ch, 0.1).unwrap();
        assert!((row.weights[1] - 0.5).abs() < 1e-12);
        assert!((row.weights[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weak_eavesdropper_is_dropped() {
        // Node 2 barely hears node 0; jamming it is wasted power.
        let ch = channels(
            &[3.0, 1.0, 1.0],
            &[vec![0.0, 2e-9, 1e-25], vec![1e-9, 0.0, 4e-9], vec![1e-9, 4e-9, 0.0]],
        );
        let row = blind_slot(0, &ch, 0.1).unwrap();
        assert_eq!(row.weights[2], 0.0);
        assert_eq!(row.weights[1], 1.0);
        assert_eq!(row.removals, 1);
        assert_eq!(row.active_set, vec![1]);
    }

    #[test]
    fn single_node_and_argument_errors() {
        let ch = channels(&[1.0], &[vec![0.0]]);
        assert!(matches!(blind_slot(0, &ch, 1.0), Err(Error::TooFewNodes { need: 2, got: 1 })));
        let m = blind_all(&ch, 1.0).unwrap();
        assert_eq!(m.xi_star, vec![0.0]);
        let ch = channels(&[2.0, 1.0], &[vec![0.0, 1e-9], vec![1e-9, 0.0]]);
        assert!(blind_slot(2, &ch, 1.0).is_err());
        assert!(blind_slot(0, &ch, 0.0).is_err());
    }

    /// Brute-force grid over the weight simplex of a three-node slot.
    fn grid_xi_k3(ch: &ChannelRealization, i: usize, p_h: f64, steps: usize) -> f64 {
        let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
        let mut best = f64::INFINITY;
        for s in 0..=steps {
            let mut row = vec![0.0; 3];
            row[others[0]] = s as f64 / steps as f64;
            row[others[1]] = 1.0 - row[others[0]];
            best = best.min(worst_slope(ch, i, &row, p_h));
        }
        best
    }

    #[test]
    fn matches_grid_search_for_three_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for t in 0..30 {
            let mut s = Scenario::random(&mut rng, 3, 8);
            s.seed = t;
            let ch = draw_channels(&s).unwrap();
            let p_h = s.p_h_watts();
            for i in 0..3 {
                let row = blind_slot(i, &ch, p_h).unwrap();
                let grid = grid_xi_k3(&ch, i, p_h, 1000);
                assert!(row.xi <= grid * (1.0 + 1e-12), "{} > {}", row.xi, grid);
                assert!(grid <= row.xi * (1.0 + 2e-3), "grid {grid} vs {}", row.xi);
            }
        }
    }

    #[test]
    fn rows_satisfy_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let k = rng.random_range(2..=6);
            let s = Scenario::random(&mut rng, k, 16);
            let ch = draw_channels(&s).unwrap();
            let m = blind_all(&ch, s.p_h_watts()).unwrap();
            assert!(m.simplex_residual() <= 1e-12);
            assert!(m.kkt_residual(&ch, s.p_h_watts()) <= 1e-9);
            assert!(m.iterations.iter().all(|&r| r <= k - 2));
        }
    }

    #[test]
    fn identical_statistics_give_equal_slopes() {
        let g = 2e-9;
        let ch = channels(
            &[1.0, 1.0, 1.0],
            &[vec![0.0, g, g], vec![g, 0.0, g], vec![g, g, 0.0]],
        );
        let m = blind_all(&ch, 0.5).unwrap();
        assert!((m.xi_star[0] - m.xi_star[1]).abs() < 1e-12 * m.xi_star[0]);
        assert!((m.xi_star[1] - m.xi_star[2]).abs() < 1e-12 * m.xi_star[0]);
    }

    #[test]
    fn uniform_matrix_is_never_better() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..40 {
            let s = Scenario::random(&mut rng, 4, 8);
            let ch = draw_channels(&s).unwrap();
            let opt = blind_all(&ch, s.p_h_watts()).unwrap();
            let uni = BlindingMatrix::uniform(&ch, s.p_h_watts());
            for i in 0..4 {
                assert!(opt.xi_star[i] <= uni.xi_star[i]);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            /// Raising one eavesdropper's gain never lowers its jamming share
            /// while it stays in the active set.
            #[test]
            fn stronger_eavesdropper_gets_no_less_weight(
                mu in prop::collection::vec(0.5f64..5.0, 4),
                cross in prop::collection::vec(1e-10f64..1e-8, 3),
                scale in 1.0f64..4.0,
                target in 0usize..3,
                p_dbm in -10.0f64..30.0,
            ) {
                let mut mu = mu;
                mu.sort_by(|a, b| b.total_cmp(a));
                let build = |c: &[f64]| {
                    let mut m = vec![vec![1e-9; 4]; 4];
                    for (j, v) in c.iter().enumerate() {
                        m[0][j + 1] = *v;
                    }
                    for (i, row) in m.iter_mut().enumerate() {
                        row[i] = 0.0;
                    }
                    channels(&mu, &m)
                };
                let p_h = crate::scenario::to_linear(p_dbm);
                let before = blind_slot(0, &build(&cross), p_h).unwrap();
                let mut bigger = cross.clone();
                bigger[target] *= scale;
                let after = blind_slot(0, &build(&bigger), p_h).unwrap();
                let j = target + 1;
                if after.weights[j] > 0.0 && before.weights[j] > 0.0 {
                    prop_assert!(after.weights[j] >= before.weights[j] - 1e-12);
                }
            }
        }
    }
}
