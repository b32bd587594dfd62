//! Baseline: every node runs an energy detector, the fusion center takes a
//! strict majority vote.

use serde::Serialize;

use crate::error::Result;
use crate::model::{Snr, SystemParams};
use crate::numerics::binomial_tail_exceeds_half;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoncoopAnalysis {
    /// Energy threshold on `|y|^2`.
    pub lambda: f64,
    /// Per-node detection probability.
    pub p_node: f64,
    /// Majority-vote detection probability at the fusion center.
    pub p_fusion: f64,
}

/// `lambda = -2 sigma_w^2 ln(alpha)`, so that `P(|w|^2 > lambda) = alpha`.
pub fn noncoop_threshold(params: &SystemParams) -> f64 {
    -2.0 * params.sigma_w2 * params.alpha.ln()
}

/// Probability that `|w|^2` exceeds `t` under H0.
pub fn false_alarm_tail(params: &SystemParams, t: f64) -> f64 {
    (-t / (2.0 * params.sigma_w2)).exp()
}

/// Probability that `|h + w|^2` exceeds `t` under H1 at the given SNR.
pub fn detection_tail(params: &SystemParams, snr: Snr, t: f64) -> f64 {
    let sigma_h2 = snr.linear() * params.sigma_w2;
    (-t / (2.0 * (sigma_h2 + params.sigma_w2))).exp()
}

/// Per-node detection probability `alpha^(1 / (1 + SNR))`.
pub fn noncoop_node_detection(params: &SystemParams, snr: Snr) -> f64 {
    params.alpha.powf(1.0 / (1.0 + snr.linear()))
}

pub fn noncoop_fusion(params: &SystemParams, snr: Snr) -> Result<NoncoopAnalysis> {
    params.validate()?;
    let lambda = noncoop_threshold(params);
    let p_node = noncoop_node_detection(params, snr);
    debug_assert!((p_node - detection_tail(params, snr, lambda)).abs() < 1e-12);
    Ok(NoncoopAnalysis {
        lambda,
        p_node,
        p_fusion: binomial_tail_exceeds_half(params.n_nodes, p_node),
    })
}
