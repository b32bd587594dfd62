//! TOML experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributed::{DistributedConfig, StepSchedule};
use crate::error::{Error, Result};
use crate::metrics::Strategy;
use crate::model::{Snr, SystemParams};
use crate::montecarlo::CoopProtocol;

use super::sweep::{Metric, SweepSpec, SweptParameter};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub system: SystemParams,
    #[serde(default)]
    pub distributed: DistributedSettings,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub validation: ValidationSettings,
    #[serde(default)]
    pub table1: Table1Section,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DsEstimatorKind {
    #[default]
    ClosedForm,
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributedSettings {
    /// Common per-node threshold `T`; the decision level is `P'(alpha) / T`.
    pub common_node_threshold: f64,
    /// `None` uses `1 / (2 T^2 N)`.
    pub step_size: Option<f64>,
    pub schedule: StepSchedule,
    pub max_passes: usize,
    pub divergence_guard: f64,
    /// Estimator used by the Monte Carlo detector.
    pub estimator: DsEstimatorKind,
}

impl Default for DistributedSettings {
    fn default() -> Self {
        DistributedSettings {
            common_node_threshold: 1.0,
            step_size: None,
            schedule: StepSchedule::Diminishing,
            max_passes: 20_000,
            divergence_guard: 1e12,
            estimator: DsEstimatorKind::ClosedForm,
        }
    }
}

impl DistributedSettings {
    pub fn config_for(&self, params: &SystemParams) -> Result<DistributedConfig> {
        let mut cfg = DistributedConfig::calibrated(params, self.common_node_threshold)?;
        if let Some(step) = self.step_size {
            cfg.step_size = step;
        }
        cfg.schedule = self.schedule;
        cfg.max_passes = self.max_passes;
        cfg.divergence_guard = self.divergence_guard;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub swept_parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub validation: bool,
    #[serde(default = "default_trials")]
    pub n_trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Operating SNR when SNR is not the swept parameter; defaults to
    /// `sigma_h2 / sigma_w2`.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
}

fn default_trials() -> u64 {
    100_000
}

fn default_seed() -> u64 {
    1
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSettings {
    /// Allowed deviation in standard errors.
    pub tolerance_se: f64,
    /// Trials for the latency simulation; `None` uses `min(n_trials, 20000)`.
    pub latency_trials: Option<u64>,
    /// Slot cap per latency trial. Censored trials blank `slots_sim`.
    pub slot_cap: u64,
    pub coop_protocol: CoopProtocol,
    /// Also run the event-literal cooperative protocol and report its gap.
    pub event_literal_check: bool,
    /// Run H0 false-alarm checks alongside detection.
    pub false_alarm_check: bool,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings {
            tolerance_se: 3.0,
            latency_trials: None,
            slot_cap: 10_000,
            coop_protocol: CoopProtocol::ModelMatched,
            event_literal_check: true,
            false_alarm_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Table1Section {
    pub low_snr_db: f64,
    pub high_snr_db: f64,
    /// Step of the SNR grid for the convergence check.
    pub grid_step_db: f64,
}

impl Default for Table1Section {
    fn default() -> Self {
        Table1Section {
            low_snr_db: 0.0,
            high_snr_db: 15.0,
            grid_step_db: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.system
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let snr = match s.snr_db {
            Some(db) => Snr::from_db(db).map_err(|e| Error::Config(e.to_string()))?,
            None => self.system.snr(),
        };
        let spec = SweepSpec {
            swept_parameter: s.swept_parameter,
            grid: s.grid.clone(),
            fixed: self.system.with_snr(snr),
            distributed: self.distributed,
            strategies: s.strategies.clone(),
            metrics: s.metrics.clone(),
            validation: s.validation,
            n_trials: s.n_trials,
            seed: s.seed,
            checks: self.validation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn table1_snrs(&self) -> Result<(Snr, Snr, f64)> {
        let t = &self.table1;
        let low = Snr::from_db(t.low_snr_db).map_err(|e| Error::Config(e.to_string()))?;
        let high = Snr::from_db(t.high_snr_db).map_err(|e| Error::Config(e.to_string()))?;
        if !(t.high_snr_db > t.low_snr_db) || !(t.grid_step_db > 0.0) {
            return Err(Error::Config(
                "table1 needs high_snr_db > low_snr_db and a positive grid_step_db".into(),
            ));
        }
        Ok((low, high, t.grid_step_db))
    }
}
