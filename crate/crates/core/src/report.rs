use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Sum of secrecy throughputs.
    Sstm,
    /// Minimum secrecy throughput.
    Mmf,
    /// Sum of log secrecy throughputs.
    Plf,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Sstm => "sstm",
            Objective::Mmf => "mmf",
            Objective::Plf => "plf",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sstm" | "sum" => Ok(Objective::Sstm),
            "mmf" | "min" => Ok(Objective::Mmf),
            "plf" | "logsum" => Ok(Objective::Plf),
            other => Err(Error::InvalidArgument(format!("unknown objective {other:?}"))),
        }
    }
}

/// Outcome of one solve. Node-indexed vectors follow the sorted channel order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective_kind: Objective,
    /// Secrecy throughput per node, nats, floored at zero.
    pub per_node: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative violation of the inner stationarity conditions.
    pub kkt_residual: f64,
    /// `sum(E0 + tau) - 1`.
    pub budget_residual: f64,
    /// Nodes excluded because their secrecy slope is not positive.
    pub inactive: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SolveReport {
    pub fn sum(&self) -> f64 {
        self.per_node.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.per_node.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn log_sum(&self) -> f64 {
        self.per_node.iter().map(|d| d.ln()).sum()
    }
}
