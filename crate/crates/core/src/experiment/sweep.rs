//! Parameter sweeps over SNR, node count or false-alarm target.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::coop::coop_fusion;
use crate::distributed::distributed_analysis;
use crate::error::{Error, Result};
use crate::metrics::{
    agility_coop, agility_distributed, coop_renewal_slots, agility_noncoop, energy_coop, energy_distributed,
    energy_noncoop, EnergyReport, Strategy,
};
use crate::model::{Hypothesis, Snr, SystemParams};
use crate::montecarlo::{
    simulate_coop_breakdown, simulate_detection_latency_with, simulate_detection_with,
    simulate_energy, CoopProtocol, DsEstimator, SimOptions, TrialPlan,
};
use crate::noncoop::noncoop_fusion;
use crate::numerics::binomial_tail_exceeds_half;

use super::config::{DistributedSettings, DsEstimatorKind, ValidationSettings};
use super::validation::{Check, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    SnrDb,
    NNodes,
    Alpha,
}

impl SweptParameter {
    pub fn code(self) -> &'static str {
        match self {
            SweptParameter::SnrDb => "snr_db",
            SweptParameter::NNodes => "n_nodes",
            SweptParameter::Alpha => "alpha",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        [SweptParameter::SnrDb, SweptParameter::NNodes, SweptParameter::Alpha]
            .into_iter()
            .find(|p| p.code() == s)
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            SweptParameter::SnrDb => "SNR (dB)",
            SweptParameter::NNodes => "Number of nodes N",
            SweptParameter::Alpha => "Target false-alarm probability",
        }
    }

    /// Scenario at grid value `v`.
    pub fn apply(self, fixed: &SystemParams, v: f64) -> Result<SystemParams> {
        let p = match self {
            SweptParameter::SnrDb => fixed.with_snr(Snr::from_db(v)?),
            SweptParameter::NNodes => {
                if !(v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                    return Err(Error::InvalidParams(format!(
                        "n_nodes grid value must be a positive integer, got {v}"
                    )));
                }
                SystemParams {
                    n_nodes: v as usize,
                    ..fixed.clone()
                }
            }
            SweptParameter::Alpha => SystemParams {
                alpha: v,
                ..fixed.clone()
            },
        };
        p.validate()?;
        Ok(p)
    }
}

/// Which quantities a sweep computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Detection,
    Agility,
    Energy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Detection, Metric::Agility, Metric::Energy];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub swept_parameter: SweptParameter,
    pub grid: Vec<f64>,
    /// Scenario at every grid point before the swept value is applied.
    pub fixed: SystemParams,
    pub distributed: DistributedSettings,
    pub strategies: Vec<Strategy>,
    pub metrics: Vec<Metric>,
    pub validation: bool,
    pub n_trials: u64,
    pub seed: u64,
    pub checks: ValidationSettings,
}

impl SweepSpec {
    /// Analytic-only sweep of every metric over `grid`.
    pub fn analytic(swept_parameter: SweptParameter, grid: Vec<f64>, fixed: SystemParams) -> Self {
        SweepSpec {
            swept_parameter,
            grid,
            fixed,
            distributed: DistributedSettings::default(),
            strategies: Strategy::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            validation: false,
            n_trials: 100_000,
            seed: 1,
            checks: ValidationSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.is_empty() {
            return bad("sweep grid is empty".into());
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return bad("sweep grid contains a non-finite value".into());
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sweep grid must be strictly increasing".into());
        }
        if self.strategies.is_empty() {
            return bad("sweep lists no strategies".into());
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return bad("sweep lists a strategy twice".into());
        }
        if self.metrics.is_empty() {
            return bad("sweep lists no metrics".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be positive".into());
        }
        if !(self.checks.tolerance_se > 0.0) || self.checks.slot_cap == 0 {
            return bad("validation tolerance and slot cap must be positive".into());
        }
        if self.checks.latency_trials == Some(0) {
            return bad("latency_trials must be positive".into());
        }
        self.fixed.validate().map_err(|e| Error::Config(e.to_string()))
    }

    fn has(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

/// One CSV line. Empty fields are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub grid_param: SweptParameter,
    pub grid_value: f64,
    pub strategy: Strategy,
    /// Per-node detection probability (Node-2 probability for CS, none for DS).
    pub p_node: Option<f64>,
    pub p_fusion: Option<f64>,
    pub p_fusion_sim: Option<f64>,
    pub p_fusion_ci: Option<f64>,
    /// Expected slots as the closed form states it.
    pub slots_paper: Option<f64>,
    pub slots_sim: Option<f64>,
    pub slots_ci: Option<f64>,
    pub energy_total: Option<f64>,
    pub energy_sim: Option<f64>,
    pub energy_ci: Option<f64>,
    pub fairness_mu: Option<f64>,
}

impl SweepRow {
    fn empty(grid_param: SweptParameter, grid_value: f64, strategy: Strategy) -> Self {
        SweepRow {
            grid_param,
            grid_value,
            strategy,
            p_node: None,
            p_fusion: None,
            p_fusion_sim: None,
            p_fusion_ci: None,
            slots_paper: None,
            slots_sim: None,
            slots_ci: None,
            energy_total: None,
            energy_sim: None,
            energy_ci: None,
            fairness_mu: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointError {
    pub grid_index: usize,
    pub grid_value: f64,
    pub strategy: Strategy,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid_param: SweptParameter,
    /// Rows in grid order, strategies in spec order within a grid value.
    pub rows: Vec<SweepRow>,
    pub errors: Vec<PointError>,
    /// Present iff the sweep ran with validation.
    pub validation: Option<ValidationReport>,
}

impl SweepResult {
    pub fn row(&self, grid_value: f64, strategy: Strategy) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.grid_value == grid_value && r.strategy == strategy)
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut s: Vec<Strategy> = self.rows.iter().map(|r| r.strategy).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// Closed-form values for one strategy at one scenario.
#[derive(Debug, Clone, Copy)]
struct Analytic {
    p_node: Option<f64>,
    p_fusion: f64,
    slots_literal: f64,
    /// Mean slots of the process the simulator runs (renewal form for CS).
    slots_consistent: f64,
    /// Standard deviation of one latency draw under that process.
    slots_sd: f64,
    energy: EnergyReport,
    /// CS only: expected T1 failures and the T2 vote size.
    n_prime: Option<(f64, usize)>,
}

fn analyse(p: &SystemParams, strategy: Strategy) -> Result<Analytic> {
    let snr = p.snr();
    Ok(match strategy {
        Strategy::Noncooperative => {
            let a = noncoop_fusion(p, snr)?;
            let slots = agility_noncoop(&a).map(|r| r.expected_slots).unwrap_or(f64::INFINITY);
            Analytic {
                p_node: Some(a.p_node),
                p_fusion: a.p_fusion,
                slots_literal: slots,
                slots_consistent: slots,
                slots_sd: geometric_sd(1.0, a.p_fusion),
                energy: energy_noncoop(p),
                n_prime: None,
            }
        }
        Strategy::Cooperative => {
            let a = coop_fusion(p, snr)?;
            let literal = agility_coop(&a).map(|r| r.expected_slots).unwrap_or(f64::INFINITY);
            let renewal = coop_renewal_slots(a.p_fc_t1, a.p_fc_t2).unwrap_or(f64::INFINITY);
            Analytic {
                p_node: Some(a.p_c),
                p_fusion: a.p_fc_total,
                slots_literal: literal,
                slots_consistent: renewal,
                slots_sd: renewal_sd(a.p_fc_t1, a.p_fc_t2),
                energy: energy_coop(p, snr)?,
                n_prime: Some((a.n_prime, a.t2_voters)),
            }
        }
        Strategy::Distributed => {
            let a = distributed_analysis(p, snr)?;
            let per_attempt = (a.slots_per_iteration * a.k_iterations) as f64;
            let slots = agility_distributed(&a)
                .map(|r| r.expected_slots)
                .unwrap_or(f64::INFINITY);
            Analytic {
                p_node: None,
                p_fusion: a.p_d,
                slots_literal: slots,
                slots_consistent: slots,
                slots_sd: geometric_sd(per_attempt, a.p_d),
                energy: energy_distributed(p, a.k_iterations)?,
                n_prime: None,
            }
        }
    })
}

/// Conditional means are NaN when the conditioning event never occurred.
fn show(v: f64) -> String {
    if v.is_nan() {
        "n/a (no T1 miss observed)".into()
    } else {
        format!("{v:.4}")
    }
}

/// Standard deviation of `cost * Geometric(p)`.
fn geometric_sd(cost: f64, p: f64) -> f64 {
    cost * (1.0 - p).sqrt() / p
}

/// Standard deviation of the slots to first success of the two-slot cycle
/// (success in T1 costs 1, success in T2 or a full miss costs 2).
fn renewal_sd(p1: f64, p2: f64) -> f64 {
    let q = 1.0 - p1 - p2;
    let m = (2.0 - p1) / (p1 + p2);
    let second = (p1 + 4.0 * p2 + 4.0 * q + 4.0 * q * m) / (1.0 - q);
    (second - m * m).max(0.0).sqrt()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent master seed per (grid point, strategy, simulation kind).
fn derive_seed(master: u64, grid_index: usize, strategy: Strategy, purpose: u64) -> u64 {
    let s = strategy as u64;
    splitmix(splitmix(splitmix(master) ^ grid_index as u64) ^ (s << 8 | purpose))
}

const SEED_DETECT: u64 = 1;
const SEED_FALSE_ALARM: u64 = 2;
const SEED_LATENCY: u64 = 3;
const SEED_ENERGY: u64 = 4;
const SEED_EVENT_LITERAL: u64 = 5;

/// Latency is simulated only where the expected value sits this far below
/// the slot cap, so censoring is negligible and run time stays bounded.
const LATENCY_CAP_MARGIN: f64 = 20.0;

fn evaluate_point(
    spec: &SweepSpec,
    grid_index: usize,
    strategy: Strategy,
) -> Result<(SweepRow, Vec<Check>)> {
    let v = spec.grid[grid_index];
    let p = spec.swept_parameter.apply(&spec.fixed, v)?;
    let a = analyse(&p, strategy)?;
    let mut row = SweepRow::empty(spec.swept_parameter, v, strategy);
    if spec.has(Metric::Detection) {
        row.p_node = a.p_node;
        row.p_fusion = Some(a.p_fusion);
    }
    if spec.has(Metric::Agility) {
        row.slots_paper = Some(a.slots_literal);
    }
    if spec.has(Metric::Energy) {
        row.energy_total = Some(a.energy.total_energy);
        row.fairness_mu = Some(a.energy.fairness_mu);
    }
    let mut checks = Vec::new();
    if spec.validation {
        validate_point(spec, grid_index, strategy, &p, &a, &mut row, &mut checks)?;
    }
    Ok((row, checks))
}

#[allow(clippy::too_many_arguments)]
fn validate_point(
    spec: &SweepSpec,
    grid_index: usize,
    strategy: Strategy,
    p: &SystemParams,
    a: &Analytic,
    row: &mut SweepRow,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let snr = p.snr();
    let at = (spec.swept_parameter, spec.grid[grid_index], strategy);
    let settings = &spec.checks;
    let tol = settings.tolerance_se;
    let seed = |purpose| derive_seed(spec.seed, grid_index, strategy, purpose);
    let ds_cfg = spec.distributed.config_for(p)?;
    let opts = SimOptions {
        coop_protocol: settings.coop_protocol,
        ds_estimator: match spec.distributed.estimator {
            DsEstimatorKind::ClosedForm => DsEstimator::ClosedForm,
            DsEstimatorKind::Incremental => DsEstimator::Incremental(ds_cfg),
        },
        ds_node_threshold: Some(ds_cfg.common_node_threshold),
        slot_cap: Some(settings.slot_cap),
    };
    let plan = |hypothesis, purpose, n_trials| TrialPlan {
        n_trials,
        master_seed: seed(purpose),
        hypothesis,
        strategy,
    };

    if spec.has(Metric::Detection) {
        let sim = if strategy == Strategy::Cooperative {
            let b = simulate_coop_breakdown(p, snr, Hypothesis::H1, spec.n_trials, seed(SEED_DETECT), settings.coop_protocol)?;
            if let Some((n_prime, voters)) = a.n_prime {
                checks.push(Check::info(
                    at,
                    "T1 failing count",
                    n_prime,
                    None,
                    format!(
                        "analytic N' = {n_prime:.4} (T2 vote {voters}); simulated mean {} overall, {} given T1 miss, T2 voters {}",
                        show(b.mean_failing),
                        show(b.mean_failing_given_t1_miss),
                        show(b.mean_t2_voters)
                    ),
                ));
            }
            if settings.event_literal_check && settings.coop_protocol != CoopProtocol::EventLiteral {
                let lit = simulate_coop_breakdown(p, snr, Hypothesis::H1, spec.n_trials, seed(SEED_EVENT_LITERAL), CoopProtocol::EventLiteral)?;
                checks.push(Check::info(
                    at,
                    "p_fusion event-literal",
                    a.p_fusion,
                    Some(&lit.total),
                    format!(
                        "relay only on Node-1 miss, vote over {} relayed pairs on average",
                        show(lit.mean_t2_voters)
                    ),
                ));
            }
            b.total
        } else {
            simulate_detection_with(p, snr, &plan(Hypothesis::H1, SEED_DETECT, spec.n_trials), opts)?
        };
        row.p_fusion_sim = Some(sim.mean);
        row.p_fusion_ci = Some(sim.half_width_95);
        checks.push(Check::gated(at, "p_fusion", a.p_fusion, &sim, tol));

        if settings.false_alarm_check {
            let n = p.n_nodes;
            let (label, expected, sim) = match strategy {
                Strategy::Noncooperative => (
                    "false alarm",
                    binomial_tail_exceeds_half(n, p.alpha),
                    simulate_detection_with(p, snr, &plan(Hypothesis::H0, SEED_FALSE_ALARM, spec.n_trials), opts)?,
                ),
                Strategy::Cooperative => (
                    "false alarm T1",
                    binomial_tail_exceeds_half(n, p.alpha),
                    simulate_coop_breakdown(p, snr, Hypothesis::H0, spec.n_trials, seed(SEED_FALSE_ALARM), settings.coop_protocol)?.t1,
                ),
                Strategy::Distributed => (
                    "false alarm",
                    p.alpha,
                    simulate_detection_with(p, snr, &plan(Hypothesis::H0, SEED_FALSE_ALARM, spec.n_trials), opts)?,
                ),
            };
            checks.push(Check::gated(at, label, expected, &sim, tol));
        }
    }

    if spec.has(Metric::Agility) {
        if strategy == Strategy::Cooperative {
            let rel = (a.slots_literal - a.slots_consistent) / a.slots_consistent;
            checks.push(Check::flag(
                at,
                "slots literal vs renewal",
                a.slots_literal,
                a.slots_consistent,
                format!(
                    "literal 1/p1 + 2/p2 differs from renewal (2 - p1)/(p1 + p2) by {:+.2}%",
                    100.0 * rel
                ),
            ));
        }
        let n_latency = settings.latency_trials.unwrap_or(spec.n_trials.min(20_000));
        let budget = settings.slot_cap as f64 / LATENCY_CAP_MARGIN;
        if !(a.slots_consistent <= budget) {
            checks.push(Check::info(
                at,
                "slots",
                a.slots_consistent,
                None,
                format!(
                    "expected latency exceeds 1/{LATENCY_CAP_MARGIN} of the {}-slot cap; not simulated",
                    settings.slot_cap
                ),
            ));
            return finish_energy(spec, at, a, row, checks, p, &plan(Hypothesis::H1, SEED_ENERGY, spec.n_trials));
        }
        let lat = simulate_detection_latency_with(p, snr, &plan(Hypothesis::H1, SEED_LATENCY, n_latency), opts)?;
        if lat.censored == 0 {
            row.slots_sim = Some(lat.slots.mean);
            row.slots_ci = Some(lat.slots.half_width_95);
            let se = a.slots_sd / (lat.slots.n_trials as f64).sqrt();
            checks.push(Check::gated_with_se(at, "slots", a.slots_consistent, &lat.slots, se, tol));
        } else {
            checks.push(Check::info(
                at,
                "slots",
                a.slots_consistent,
                None,
                format!(
                    "{} of {} latency trials hit the {}-slot cap; simulated mean withheld",
                    lat.censored, n_latency, lat.slot_cap
                ),
            ));
        }
    }

    finish_energy(spec, at, a, row, checks, p, &plan(Hypothesis::H1, SEED_ENERGY, spec.n_trials))
}

fn finish_energy(
    spec: &SweepSpec,
    at: (SweptParameter, f64, Strategy),
    a: &Analytic,
    row: &mut SweepRow,
    checks: &mut Vec<Check>,
    p: &SystemParams,
    plan: &TrialPlan,
) -> Result<()> {
    let tol = spec.checks.tolerance_se;
    if spec.has(Metric::Energy) {
        let e = simulate_energy(p, p.snr(), plan)?;
        row.energy_sim = Some(e.total.mean);
        row.energy_ci = Some(e.total.half_width_95);
        checks.push(Check::gated(at, "energy_total", a.energy.total_energy, &e.total, tol));
        checks.push(Check::info(
            at,
            "fairness_mu",
            a.energy.fairness_mu,
            None,
            format!("simulated max/min per-slot node energy {:.6}", e.fairness_mu),
        ));
    }
    Ok(())
}

/// Evaluates every (grid value, strategy) pair. Points may run in parallel;
/// rows come back in grid order. A failing point is recorded in `errors` and
/// the rest of the sweep still runs.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(usize, Strategy)> = (0..spec.grid.len())
        .flat_map(|i| spec.strategies.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<Result<(SweepRow, Vec<Check>)>> = jobs
        .par_iter()
        .map(|&(i, s)| evaluate_point(spec, i, s))
        .collect();
    let mut rows = Vec::with_capacity(jobs.len());
    let mut errors = Vec::new();
    let mut checks = Vec::new();
    for (&(i, s), out) in jobs.iter().zip(outcomes) {
        match out {
            Ok((row, c)) => {
                rows.push(row);
                checks.extend(c);
            }
            Err(e) => errors.push(PointError {
                grid_index: i,
                grid_value: spec.grid[i],
                strategy: s,
                message: e.to_string(),
            }),
        }
    }
    Ok(SweepResult {
        grid_param: spec.swept_parameter,
        rows,
        errors,
        validation: spec.validation.then_some(ValidationReport { checks }),
    })
}

/// Rayon pool honouring `SPECSENSE_THREADS`; absent means all cores.
pub fn thread_pool_from_env() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SPECSENSE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("SPECSENSE_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}
