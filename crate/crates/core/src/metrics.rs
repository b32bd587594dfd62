//! Agility (expected slots to first fusion-center detection), total energy per
//! detection attempt, and fairness `mu = E_max / E_min`.
//!
//! Distances on the unit square: node to fusion center is 1, a relay-pair hop
//! is `N^{-1/2}`, and a hop along the distributed path is `sqrt(log^2 N / N)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coop::{check_pairing, CoopAnalysis};
use crate::distributed::DistributedAnalysis;
use crate::error::{Error, Result};
use crate::model::{Snr, SystemParams};
use crate::noncoop::{noncoop_node_detection, NoncoopAnalysis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "NCS")]
    Noncooperative,
    #[serde(rename = "CS")]
    Cooperative,
    #[serde(rename = "DS")]
    Distributed,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Noncooperative,
        Strategy::Cooperative,
        Strategy::Distributed,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Strategy::Noncooperative => "NCS",
            Strategy::Cooperative => "CS",
            Strategy::Distributed => "DS",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.code() == s)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgilityReport {
    pub strategy: Strategy,
    /// Expected slots as the closed form states it. For CS this is the
    /// literal sum of a one-slot and a two-slot geometric mean.
    pub expected_slots: f64,
    /// CS only: mean slots to first success of the T1/T2 renewal cycle,
    /// `(2 - p_t1) / (p_t1 + p_t2)`.
    pub renewal_slots: Option<f64>,
    /// Slots one detection attempt costs (1 for NCS, N_s K for DS).
    pub slots_per_attempt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub strategy: Strategy,
    pub total_energy: f64,
    pub fairness_mu: f64,
    pub e_max: f64,
    pub e_min: f64,
}

/// Mean of a geometric number of attempts, `1 / p`.
pub fn expected_slots_geometric(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "geometric success probability must lie in (0, 1], got {p}"
        )));
    }
    Ok(1.0 / p)
}

fn geometric_or_infinite(p: f64, strategy: &'static str) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::InfiniteAgility(strategy));
    }
    expected_slots_geometric(p)
}

pub fn agility_noncoop(analysis: &NoncoopAnalysis) -> Result<AgilityReport> {
    Ok(AgilityReport {
        strategy: Strategy::Noncooperative,
        expected_slots: geometric_or_infinite(analysis.p_fusion, "NCS")?,
        renewal_slots: None,
        slots_per_attempt: 1.0,
    })
}

/// Renewal mean for the two-slot cycle: each cycle succeeds in T1 with
/// `p_t1`, in T2 with `p_t2` (unconditional), and otherwise costs two slots.
pub fn coop_renewal_slots(p_t1: f64, p_t2: f64) -> Result<f64> {
    let s = p_t1 + p_t2;
    if s <= 0.0 {
        return Err(Error::InfiniteAgility("CS"));
    }
    Ok((2.0 - p_t1) / s)
}

pub fn agility_coop(analysis: &CoopAnalysis) -> Result<AgilityReport> {
    let literal = geometric_or_infinite(analysis.p_fc_t1, "CS (T1)")?
        + 2.0 * geometric_or_infinite(analysis.p_fc_t2, "CS (T2)")?;
    Ok(AgilityReport {
        strategy: Strategy::Cooperative,
        expected_slots: literal,
        renewal_slots: Some(coop_renewal_slots(analysis.p_fc_t1, analysis.p_fc_t2)?),
        slots_per_attempt: 1.0,
    })
}

pub fn agility_distributed(analysis: &DistributedAnalysis) -> Result<AgilityReport> {
    let per_attempt = (analysis.slots_per_iteration * analysis.k_iterations) as f64;
    Ok(AgilityReport {
        strategy: Strategy::Distributed,
        expected_slots: per_attempt * geometric_or_infinite(analysis.p_d, "DS")?,
        renewal_slots: None,
        slots_per_attempt: per_attempt,
    })
}

/// Relay-pair hop length `N^{-1/2}`.
pub fn relay_hop(params: &SystemParams) -> f64 {
    (params.n_nodes as f64).powf(-0.5)
}

/// Distributed-path hop length `sqrt(log^2 N / N)` in the configured base.
pub fn path_hop(params: &SystemParams) -> f64 {
    let n = params.n_nodes as f64;
    n.log(params.hop_log_base).abs() / n.sqrt()
}

pub fn energy_noncoop(params: &SystemParams) -> EnergyReport {
    EnergyReport {
        strategy: Strategy::Noncooperative,
        total_energy: params.eta * params.n_nodes as f64,
        fairness_mu: 1.0,
        e_max: params.eta,
        e_min: params.eta,
    }
}

pub fn energy_coop(params: &SystemParams, snr: Snr) -> Result<EnergyReport> {
    check_pairing(params)?;
    let n = params.n_nodes as f64;
    let p_node = noncoop_node_detection(params, snr);
    let eta = params.eta;
    let e_max = eta * relay_hop(params) + eta;
    Ok(EnergyReport {
        strategy: Strategy::Cooperative,
        total_energy: (1.0 - p_node) * eta * n.sqrt() + eta * n,
        fairness_mu: 1.0 + n.powf(-0.5),
        e_max,
        e_min: eta,
    })
}

pub fn energy_distributed(params: &SystemParams, k_iterations: usize) -> Result<EnergyReport> {
    if params.n_nodes < 2 {
        return Err(Error::InvalidParams(
            "distributed energy model needs n_nodes >= 2 (log N must be positive)".into(),
        ));
    }
    if k_iterations == 0 {
        return Err(Error::InvalidParams("iteration count K must be at least 1".into()));
    }
    let n = params.n_nodes as f64;
    let k = k_iterations as f64;
    let hop = path_hop(params);
    let eta = params.eta;
    Ok(EnergyReport {
        strategy: Strategy::Distributed,
        total_energy: k * n * eta * hop + k * params.n_clusters as f64 * eta,
        fairness_mu: 1.0 + n.sqrt() / n.log(params.hop_log_base),
        e_max: eta * hop + eta,
        e_min: eta * hop,
    })
}
