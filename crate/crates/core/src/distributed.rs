//! Distributed strategy: a token carrying the running estimate of theta walks
//! a path through all nodes, each node applying an incremental gradient step
//! on its own squared residual `(|y_i|^2 - T theta)^2`. The fusion center
//! compares the final estimate against a decision level `t`.
//!
//! With a common per-node threshold `T` the least-squares minimiser is
//! `theta = sum |y_i|^2 / (N T)`, so the detector only depends on the product
//! `T t`, which is calibrated against the Erlang(N) tail of the summed noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{energy_statistic, ChannelDraw, Snr, SystemParams};
use crate::numerics::{erlang_survival, solve_decreasing_from_zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// Same step every pass.
    Constant,
    /// `step / k` on pass `k` (1-based).
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributedConfig {
    /// Decision level `t` applied to the final estimate.
    pub detection_threshold_t: f64,
    /// Common per-node threshold `T`.
    pub common_node_threshold: f64,
    pub step_size: f64,
    pub schedule: StepSchedule,
    pub max_passes: usize,
    /// `|theta|` above this aborts the pass as divergent.
    pub divergence_guard: f64,
}

impl DistributedConfig {
    /// Calibrates `t = P'(alpha) / T` for the given `T` and uses the default
    /// step `1 / (2 T^2 N)` with a diminishing schedule.
    pub fn calibrated(params: &SystemParams, common_node_threshold: f64) -> Result<Self> {
        if !(common_node_threshold > 0.0 && common_node_threshold.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "common node threshold must be positive, got {common_node_threshold}"
            )));
        }
        let p_prime = calibrate_false_alarm(params)?;
        Ok(DistributedConfig {
            detection_threshold_t: p_prime / common_node_threshold,
            common_node_threshold,
            step_size: default_step(params, common_node_threshold),
            schedule: StepSchedule::Diminishing,
            max_passes: 20_000,
            divergence_guard: 1e12,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.detection_threshold_t > 0.0
            && self.common_node_threshold > 0.0
            && self.step_size > 0.0
            && self.max_passes > 0
            && self.divergence_guard > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid distributed config {self:?}")))
        }
    }

    fn step_at(&self, pass: usize) -> f64 {
        match self.schedule {
            StepSchedule::Constant => self.step_size,
            StepSchedule::Diminishing => self.step_size / pass as f64,
        }
    }
}

pub fn default_step(params: &SystemParams, common_node_threshold: f64) -> f64 {
    1.0 / (2.0 * common_node_threshold * common_node_threshold * params.n_nodes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributedAnalysis {
    /// Calibrated product `T t`.
    pub p_prime_alpha: f64,
    pub p_d: f64,
    /// Iterations K needed to bring the estimate within `c^2`.
    pub k_iterations: usize,
    /// Slots per iteration, N_s.
    pub slots_per_iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalPassTrace {
    /// Estimate after every node update, pass by pass.
    pub theta_path: Vec<f64>,
    pub final_estimate: f64,
}

/// `(1/N) sum (|y_i|^2 - T theta)^2`.
pub fn objective(y_sq: &[f64], t_common: f64, theta: f64) -> f64 {
    assert!(!y_sq.is_empty());
    y_sq.iter().map(|&e| (e - t_common * theta).powi(2)).sum::<f64>() / y_sq.len() as f64
}

/// Single-node term `(|y_i|^2 - T theta)^2`.
pub fn node_objective(y_sq_i: f64, t_common: f64, theta: f64) -> f64 {
    (y_sq_i - t_common * theta).powi(2)
}

/// Derivative of [`node_objective`] in theta: `-2 T (|y_i|^2 - T theta)`.
/// Its magnitude is `2 T | |y_i|^2 - T theta |`, bounded by `c` whenever the
/// residual stays below `c / (2T)`.
pub fn node_gradient(y_sq_i: f64, t_common: f64, theta: f64) -> f64 {
    -2.0 * t_common * (y_sq_i - t_common * theta)
}

/// Least-squares estimate `sum |y_i|^2 / (N T)`.
pub fn closed_form_estimate(y_sq: &[f64], t_common: f64) -> f64 {
    assert!(!y_sq.is_empty() && t_common > 0.0);
    y_sq.iter().sum::<f64>() / (y_sq.len() as f64 * t_common)
}

/// Runs `cfg.max_passes` passes over the nodes in index order starting from
/// `params.theta_init`.
pub fn incremental_pass(
    draw: &ChannelDraw,
    cfg: &DistributedConfig,
    params: &SystemParams,
) -> Result<IncrementalPassTrace> {
    let y_sq: Vec<f64> = draw.y.iter().map(|&y| energy_statistic(y)).collect();
    incremental_pass_energies(&y_sq, cfg, params.theta_init)
}

pub fn incremental_pass_energies(
    y_sq: &[f64],
    cfg: &DistributedConfig,
    theta_init: f64,
) -> Result<IncrementalPassTrace> {
    cfg.validate()?;
    if y_sq.is_empty() {
        return Err(Error::InvalidParams("incremental pass over zero nodes".into()));
    }
    let t = cfg.common_node_threshold;
    let mut theta = theta_init;
    let mut theta_path = Vec::with_capacity(cfg.max_passes * y_sq.len());
    for pass in 1..=cfg.max_passes {
        let step = cfg.step_at(pass);
        for &e in y_sq {
            theta -= step * node_gradient(e, t, theta);
            theta_path.push(theta);
            if !(theta.abs() <= cfg.divergence_guard) {
                return Err(Error::Divergence {
                    magnitude: theta.abs(),
                    guard: cfg.divergence_guard,
                    updates: theta_path.len(),
                    trace: theta_path,
                });
            }
        }
    }
    Ok(IncrementalPassTrace {
        theta_path,
        final_estimate: theta,
    })
}

/// Product `P'(alpha) = T t` with `erlang_survival(N, N P' / (2 sigma_w^2)) = alpha`.
pub fn calibrate_false_alarm(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    let n = params.n_nodes;
    let scale = n as f64 / (2.0 * params.sigma_w2);
    let x = solve_decreasing_from_zero(|x| erlang_survival(n, scale * x), params.alpha, 1.0)?;
    Ok(x)
}

fn detection_given_product(params: &SystemParams, snr: Snr, p_prime: f64) -> f64 {
    let n = params.n_nodes;
    let total_var = params.sigma_w2 * (1.0 + snr.linear());
    erlang_survival(n, n as f64 * p_prime / (2.0 * total_var))
}

pub fn distributed_detection_probability(params: &SystemParams, snr: Snr) -> Result<f64> {
    let p_prime = calibrate_false_alarm(params)?;
    Ok(detection_given_product(params, snr, p_prime))
}

/// `max(1, ceil(|theta_init - 1| / c^2))`, measured towards theta = 1.
pub fn iteration_count(params: &SystemParams) -> usize {
    let k = ((params.theta_init - 1.0).abs() / (params.grad_bound * params.grad_bound)).ceil();
    (k as usize).max(1)
}

pub fn distributed_analysis(params: &SystemParams, snr: Snr) -> Result<DistributedAnalysis> {
    let p_prime_alpha = calibrate_false_alarm(params)?;
    Ok(DistributedAnalysis {
        p_prime_alpha,
        p_d: detection_given_product(params, snr, p_prime_alpha),
        k_iterations: iteration_count(params),
        slots_per_iteration: params.cluster_size(),
    })
}
