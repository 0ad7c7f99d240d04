//! Secrecy-throughput optimization for full-duplex wireless powered networks.
//!
//! A multi-antenna base station charges `K` single-antenna nodes and, in the
//! same band, receives their uplink packets one slot at a time. While a node
//! transmits, the base station's energy beam doubles as artificial noise
//! against the other nodes, which are treated as potential eavesdroppers.
//!
//! The solvers work in two stages:
//!
//! 1. [`blinding`] picks, for every information slot, the beam split that
//!    minimizes the worst eavesdropper's SINR slope.
//! 2. With that split fixed, the energy-slot beam and the slot durations are
//!    chosen to maximize the sum ([`sstm`]), the minimum or the log-sum
//!    ([`fairness`]) of the per-node secrecy throughputs.
//!
//! [`baselines`] holds the uniform reference schemes, [`oracle`] an
//! independent conditional-gradient solver and derivative checks, and
//! [`harness`] the Monte Carlo runner behind the `wpcn` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod blinding;
mod descent;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod secrecy;
pub mod sstm;
pub mod validation;

pub use blinding::{blind_all, blind_slot, BlindingMatrix};
pub use error::{Error, Result};
pub use report::{Objective, SolveReport};
pub use scenario::{draw_channels, to_linear, ChannelRealization, Fading, Polar, Scenario};
pub use secrecy::{Allocation, NodeParams, Problem};
pub use sstm::{GradientMode, SolverConfig};
