//! Two-slot cooperative strategy with amplify-and-forward relay pairs.
//!
//! Nodes are paired `(0, 1), (2, 3), ...`. In T1 every node runs the baseline
//! energy detector and the fusion center votes. If that vote fails, each pair's
//! first node forwards its T1 sample scaled by `sqrt(beta_1)` and the second
//! node detects on `theta h_p2 + w_2 + sqrt(beta_1) h_12 y_1` in T2.
//!
//! Noise is normalised away: with `SNR = sigma_h^2 / sigma_w^2`, the T2
//! statistic `|y_2|^2 / (2 sigma_w^2)` given `h_12` is exponential with mean
//! `1 + theta SNR + P_relay |h_12|^2`. Averaging over `|h_12|^2 ~ Exp(E|h_12|^2)`
//! gives `phi(lambda; 1 + theta SNR, P_relay E|h_12|^2)`. The T2 threshold
//! returned here is on that normalised scale.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Snr, SystemParams};
use crate::noncoop::noncoop_node_detection;
use crate::numerics::{binomial_tail_exceeds_half, phi, solve_decreasing_from_zero, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoopAnalysis {
    /// T2 threshold on `|y_2|^2 / (2 sigma_w^2)`.
    pub lambda_c: f64,
    /// Node-2 detection probability in T2.
    pub p_c: f64,
    /// Per-node T1 detection probability (same as the baseline).
    pub p_node_t1: f64,
    pub p_fc_t1: f64,
    pub p_fc_t2: f64,
    pub p_fc_total: f64,
    /// Expected number of nodes failing in T1, `(1 - p_node_t1) N`.
    pub n_prime: f64,
    /// `n_prime` rounded to the nearest integer; the T2 vote size.
    pub t2_voters: usize,
}

impl CoopAnalysis {
    /// Fraction of the two-slot detection probability contributed by T2.
    pub fn t2_share(&self) -> f64 {
        if self.p_fc_total > 0.0 {
            self.p_fc_t2 / self.p_fc_total
        } else {
            0.0
        }
    }
}

/// Relay scaling `beta_1 = P_relay / (theta^2 SNR + 1)`.
pub fn relay_scaling(params: &SystemParams, snr: Snr, theta: f64) -> f64 {
    params.relay_power / (theta * theta * snr.linear() + 1.0)
}

fn relay_gain(params: &SystemParams) -> f64 {
    params.relay_power * params.relay_gain2
}

pub fn check_pairing(params: &SystemParams) -> Result<()> {
    if params.n_nodes < 2 || params.n_nodes % 2 != 0 {
        return Err(Error::InvalidParams(format!(
            "cooperative relaying pairs nodes and needs an even n_nodes >= 2, got {}",
            params.n_nodes
        )));
    }
    Ok(())
}

/// Solves `phi(lambda; 1, P_relay E|h_12|^2) = alpha`.
pub fn coop_threshold(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    let cfg = QuadratureConfig::default();
    let b = relay_gain(params);
    let mut failure = None;
    let lambda = solve_decreasing_from_zero(
        |t| match phi(t, 1.0, b, &cfg) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        params.alpha,
        1.0,
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(lambda?)
}

fn node2_detection_at(params: &SystemParams, snr: Snr, lambda_c: f64) -> Result<f64> {
    let theta = 1.0;
    let a = snr.linear() + 1.0;
    let b = relay_gain(params) * (snr.linear() + 1.0) / (theta * theta * snr.linear() + 1.0);
    Ok(phi(lambda_c, a, b, &QuadratureConfig::default())?)
}

/// Node-2 detection probability under H1.
pub fn coop_node2_detection(params: &SystemParams, snr: Snr) -> Result<f64> {
    let lambda_c = coop_threshold(params)?;
    node2_detection_at(params, snr, lambda_c)
}

pub fn coop_fusion(params: &SystemParams, snr: Snr) -> Result<CoopAnalysis> {
    params.validate()?;
    check_pairing(params)?;
    let n = params.n_nodes;
    let lambda_c = coop_threshold(params)?;
    let p_c = node2_detection_at(params, snr, lambda_c)?;
    let p_node_t1 = noncoop_node_detection(params, snr);
    let p_fc_t1 = binomial_tail_exceeds_half(n, p_node_t1);
    let n_prime = (1.0 - p_node_t1) * n as f64;
    let t2_voters = n_prime.round().max(0.0) as usize;
    let p_fc_t2 = (1.0 - p_fc_t1) * binomial_tail_exceeds_half(t2_voters, p_c);
    Ok(CoopAnalysis {
        lambda_c,
        p_c,
        p_node_t1,
        p_fc_t1,
        p_fc_t2,
        p_fc_total: p_fc_t1 + p_fc_t2,
        n_prime,
        t2_voters,
    })
}
