//! Event-level simulation of the three strategies, used to cross-check every
//! closed form.
//!
//! Trial `i` draws from its own ChaCha stream keyed by `(master_seed, i)`.
//! Trials are grouped into fixed chunks of [`CHUNK`] that are reduced in index
//! order, so estimates are bit-identical for any worker count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coop::{check_pairing, coop_fusion, relay_scaling};
use crate::distributed::{
    calibrate_false_alarm, closed_form_estimate, incremental_pass_energies, iteration_count,
    DistributedConfig,
};
use crate::error::Result;
use crate::metrics::{path_hop, relay_hop, Strategy};
use crate::model::{complex_gaussian, energy_statistic, Hypothesis, Snr, SystemParams, TrialSeed};
use crate::noncoop::noncoop_threshold;

pub const CHUNK: u64 = 1024;
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPlan {
    pub n_trials: u64,
    pub master_seed: u64,
    pub hypothesis: Hypothesis,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateKind {
    Proportion,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub n_trials: u64,
    pub kind: EstimateKind,
}

impl SimEstimate {
    pub fn proportion(successes: u64, n: u64) -> Self {
        let mean = successes as f64 / n as f64;
        SimEstimate {
            mean,
            half_width_95: Z95 * (mean * (1.0 - mean) / n as f64).sqrt(),
            n_trials: n,
            kind: EstimateKind::Proportion,
        }
    }

    fn from_moments(m: &Moments) -> Self {
        let n = m.n as f64;
        let mean = m.sum / n;
        let var = if m.n > 1 {
            ((m.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        SimEstimate {
            mean,
            half_width_95: Z95 * (var / n).sqrt(),
            n_trials: m.n,
            kind: EstimateKind::Mean,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.half_width_95 / Z95
    }

    /// Standard error used when testing agreement with `expected`. For
    /// proportions this is the binomial error at `expected`, which stays
    /// meaningful when the simulation sees no events at all.
    pub fn reference_std_error(&self, expected: f64) -> f64 {
        match self.kind {
            EstimateKind::Proportion => {
                let p = expected.clamp(0.0, 1.0);
                (p * (1.0 - p) / self.n_trials as f64).sqrt()
            }
            EstimateKind::Mean => self.std_error(),
        }
    }

    /// `|mean - expected| <= k` standard errors, with a rounding floor for
    /// deterministic quantities.
    pub fn agrees_with(&self, expected: f64, k: f64) -> bool {
        let slack = 1e-9 * expected.abs().max(1.0);
        (self.mean - expected).abs() <= k * self.reference_std_error(expected) + slack
    }

    /// Signed deviation in reference standard errors.
    pub fn z_score(&self, expected: f64) -> f64 {
        let se = self.reference_std_error(expected);
        if se > 0.0 {
            (self.mean - expected) / se
        } else if self.mean == expected {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - expected)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }
}

trait Accumulator: Default + Send {
    fn merge(&mut self, other: Self);
}

/// Runs `trial` for every index, chunked and reduced in index order.
fn run_trials<A, F>(n_trials: u64, trial: F) -> A
where
    A: Accumulator,
    F: Fn(u64, &mut A) + Sync,
{
    let chunks = n_trials.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = A::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                trial(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = A::default();
    for p in partials {
        total.merge(p);
    }
    total
}

impl Accumulator for Moments {
    fn merge(&mut self, other: Self) {
        Moments::merge(self, &other);
    }
}

/// How the cooperative T2 vote is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoopProtocol {
    /// T2 is a majority over the analytic voter count `round((1 - F1) N)`;
    /// every voter runs an independent relay-pair detection (fresh Node-1
    /// sample, fresh inter-node gain). This is the probabilistic model the
    /// closed form composes, so it is the acceptance oracle.
    #[default]
    ModelMatched,
    /// Node 1 of each pair relays its actual T1 sample only if it failed in
    /// T1, and the T2 vote is a majority over the Node-2s that received a
    /// relay. The voter count is random and the relayed sample is
    /// conditioned on the T1 miss.
    EventLiteral,
}

/// How the distributed estimate is formed in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DsEstimator {
    #[default]
    ClosedForm,
    /// Run the incremental pass per attempt. Slow; for fidelity checks.
    Incremental(DistributedConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub coop_protocol: CoopProtocol,
    pub ds_estimator: DsEstimator,
    /// Common per-node threshold `T` for the distributed detector.
    pub ds_node_threshold: Option<f64>,
    /// Slot cap per latency trial; `None` uses [`DEFAULT_SLOT_CAP`].
    pub slot_cap: Option<u64>,
}

pub const DEFAULT_SLOT_CAP: u64 = 1_000_000;

/// Everything a trial needs that does not depend on the random draw.
struct Setup {
    p: SystemParams,
    theta: f64,
    lambda_nc: f64,
    /// T2 threshold on `|y_2|^2`, i.e. `2 sigma_w^2 lambda_c`.
    lambda_c_energy: f64,
    beta: f64,
    t2_voters: usize,
    ds_sum_threshold: f64,
    ds_node_threshold: f64,
    ds_t: f64,
    slots_per_ds_attempt: u64,
    opts: SimOptions,
}

impl Setup {
    fn new(params: &SystemParams, snr: Snr, hyp: Hypothesis, strategy: Strategy, opts: SimOptions) -> Result<Self> {
        params.validate()?;
        let p = params.with_snr(snr);
        let theta = hyp.theta();
        let (lambda_c_energy, t2_voters) = if strategy == Strategy::Cooperative {
            check_pairing(&p)?;
            let a = coop_fusion(&p, snr)?;
            (2.0 * p.sigma_w2 * a.lambda_c, a.t2_voters)
        } else {
            (f64::NAN, 0)
        };
        let (ds_sum_threshold, ds_t, ds_node_threshold) = if strategy == Strategy::Distributed {
            let p_prime = calibrate_false_alarm(&p)?;
            let t_node = opts.ds_node_threshold.unwrap_or(1.0);
            (p.n_nodes as f64 * p_prime, p_prime / t_node, t_node)
        } else {
            (f64::NAN, f64::NAN, 1.0)
        };
        Ok(Setup {
            theta,
            lambda_nc: noncoop_threshold(&p),
            lambda_c_energy,
            beta: relay_scaling(&p, snr, theta),
            t2_voters,
            ds_sum_threshold,
            ds_node_threshold,
            ds_t,
            slots_per_ds_attempt: (p.cluster_size() * iteration_count(&p)) as u64,
            opts,
            p,
        })
    }

    fn receive<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let h = complex_gaussian(rng, self.p.sigma_h2);
        let w = complex_gaussian(rng, self.p.sigma_w2);
        h * (self.p.primary_power * self.theta) + w
    }

    /// Number of nodes whose `|y|^2` exceeds the baseline threshold; fills
    /// `detected` when given.
    fn slot_votes<R: Rng + ?Sized>(&self, rng: &mut R, mut detected: Option<&mut Vec<(bool, Complex64)>>) -> usize {
        let mut votes = 0;
        if let Some(d) = detected.as_deref_mut() {
            d.clear();
        }
        for _ in 0..self.p.n_nodes {
            let y = self.receive(rng);
            let hit = energy_statistic(y) > self.lambda_nc;
            votes += hit as usize;
            if let Some(d) = detected.as_deref_mut() {
                d.push((hit, y));
            }
        }
        votes
    }

    fn majority(votes: usize, voters: usize) -> bool {
        voters > 0 && votes > voters / 2
    }

    /// Node-2 decision in T2 given the sample Node 1 forwards.
    fn relay_decision<R: Rng + ?Sized>(&self, rng: &mut R, y1: Complex64) -> bool {
        let h12 = complex_gaussian(rng, 0.5 * self.p.relay_gain2);
        let direct = self.receive(rng);
        let y2 = direct + h12 * y1 * self.beta.sqrt();
        energy_statistic(y2) > self.lambda_c_energy
    }

    fn ncs_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        Self::majority(self.slot_votes(rng, None), self.p.n_nodes)
    }

    /// One cooperative two-slot cycle.
    fn cs_cycle<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<(bool, Complex64)>) -> CycleOutcome {
        let votes = self.slot_votes(rng, Some(scratch));
        let failing = self.p.n_nodes - votes;
        if Self::majority(votes, self.p.n_nodes) {
            return CycleOutcome { t1: true, t2: false, failing, relays: 0 };
        }
        match self.opts.coop_protocol {
            CoopProtocol::ModelMatched => {
                let mut t2_votes = 0;
                for _ in 0..self.t2_voters {
                    let y1 = self.receive(rng);
                    t2_votes += self.relay_decision(rng, y1) as usize;
                }
                CycleOutcome {
                    t1: false,
                    t2: Self::majority(t2_votes, self.t2_voters),
                    failing,
                    relays: self.t2_voters,
                }
            }
            CoopProtocol::EventLiteral => {
                let mut relays = 0;
                let mut t2_votes = 0;
                for pair in scratch.chunks_exact(2) {
                    let (node1_hit, y1) = pair[0];
                    if !node1_hit {
                        relays += 1;
                        t2_votes += self.relay_decision(rng, y1) as usize;
                    }
                }
                CycleOutcome {
                    t1: false,
                    t2: Self::majority(t2_votes, relays),
                    failing,
                    relays,
                }
            }
        }
    }

    fn ds_attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<bool> {
        match self.opts.ds_estimator {
            DsEstimator::ClosedForm => {
                let mut total = 0.0;
                for _ in 0..self.p.n_nodes {
                    total += energy_statistic(self.receive(rng));
                }
                Ok(total > self.ds_sum_threshold)
            }
            DsEstimator::Incremental(cfg) => {
                let y_sq: Vec<f64> = (0..self.p.n_nodes)
                    .map(|_| energy_statistic(self.receive(rng)))
                    .collect();
                let trace = incremental_pass_energies(&y_sq, &cfg, self.p.theta_init)?;
                Ok(trace.final_estimate > cfg.detection_threshold_t)
            }
        }
    }

    fn ds_closed_form_estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y_sq: Vec<f64> = (0..self.p.n_nodes).map(|_| energy_statistic(self.receive(rng))).collect();
        closed_form_estimate(&y_sq, self.ds_node_threshold)
    }
}

#[derive(Debug, Clone, Copy)]
struct CycleOutcome {
    t1: bool,
    t2: bool,
    /// Nodes that missed in T1.
    failing: usize,
    /// T2 voters actually used.
    relays: usize,
}

#[derive(Default)]
struct Counts {
    n: u64,
    hits: u64,
    error: Option<String>,
}

impl Accumulator for Counts {
    fn merge(&mut self, o: Self) {
        self.n += o.n;
        self.hits += o.hits;
        if self.error.is_none() {
            self.error = o.error;
        }
    }
}

/// Fraction of trials in which the fusion center declares the primary user
/// present. For CS one trial is a full two-slot cycle.
pub fn simulate_detection(params: &SystemParams, snr: Snr, plan: &TrialPlan) -> Result<SimEstimate> {
    simulate_detection_with(params, snr, plan, SimOptions::default())
}

pub fn simulate_detection_with(
    params: &SystemParams,
    snr: Snr,
    plan: &TrialPlan,
    opts: SimOptions,
) -> Result<SimEstimate> {
    let setup = Setup::new(params, snr, plan.hypothesis, plan.strategy, opts)?;
    let counts: Counts = run_trials(plan.n_trials, |i, acc: &mut Counts| {
        let mut rng = TrialSeed::new(plan.master_seed, i).rng();
        let hit = match plan.strategy {
            Strategy::Noncooperative => setup.ncs_slot(&mut rng),
            Strategy::Cooperative => {
                let c = setup.cs_cycle(&mut rng, &mut Vec::with_capacity(setup.p.n_nodes));
                c.t1 || c.t2
            }
            Strategy::Distributed => match setup.ds_attempt(&mut rng) {
                Ok(h) => h,
                Err(e) => {
                    acc.error.get_or_insert(e.to_string());
                    false
                }
            },
        };
        acc.n += 1;
        acc.hits += hit as u64;
    });
    if let Some(e) = counts.error {
        return Err(crate::error::Error::InvalidParams(e));
    }
    Ok(SimEstimate::proportion(counts.hits, counts.n))
}

/// Breakdown of the cooperative two-slot cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoopSimBreakdown {
    pub protocol: CoopProtocol,
    /// T1 fusion success rate.
    pub t1: SimEstimate,
    /// Unconditional T2 success rate (T1 failed, T2 succeeded).
    pub t2: SimEstimate,
    pub total: SimEstimate,
    /// Mean number of T1-missing nodes, over cycles where T1 fusion failed.
    pub mean_failing_given_t1_miss: f64,
    /// Mean number of T1-missing nodes over all cycles.
    pub mean_failing: f64,
    /// Mean T2 vote size over cycles that reached T2.
    pub mean_t2_voters: f64,
}

#[derive(Default)]
struct CoopCounts {
    n: u64,
    t1: u64,
    t2: u64,
    failing: Moments,
    failing_given_miss: Moments,
    relays: Moments,
}

impl Accumulator for CoopCounts {
    fn merge(&mut self, o: Self) {
        self.n += o.n;
        self.t1 += o.t1;
        self.t2 += o.t2;
        self.failing.merge(&o.failing);
        self.failing_given_miss.merge(&o.failing_given_miss);
        self.relays.merge(&o.relays);
    }
}

pub fn simulate_coop_breakdown(
    params: &SystemParams,
    snr: Snr,
    hypothesis: Hypothesis,
    n_trials: u64,
    master_seed: u64,
    protocol: CoopProtocol,
) -> Result<CoopSimBreakdown> {
    let opts = SimOptions {
        coop_protocol: protocol,
        ..SimOptions::default()
    };
    let setup = Setup::new(params, snr, hypothesis, Strategy::Cooperative, opts)?;
    let c: CoopCounts = run_trials(n_trials, |i, acc: &mut CoopCounts| {
        let mut rng = TrialSeed::new(master_seed, i).rng();
        let mut scratch = Vec::with_capacity(setup.p.n_nodes);
        let o = setup.cs_cycle(&mut rng, &mut scratch);
        acc.n += 1;
        acc.t1 += o.t1 as u64;
        acc.t2 += o.t2 as u64;
        acc.failing.push(o.failing as f64);
        if !o.t1 {
            acc.failing_given_miss.push(o.failing as f64);
            acc.relays.push(o.relays as f64);
        }
    });
    let ratio = |m: &Moments| if m.n > 0 { m.sum / m.n as f64 } else { f64::NAN };
    Ok(CoopSimBreakdown {
        protocol,
        t1: SimEstimate::proportion(c.t1, c.n),
        t2: SimEstimate::proportion(c.t2, c.n),
        total: SimEstimate::proportion(c.t1 + c.t2, c.n),
        mean_failing_given_t1_miss: ratio(&c.failing_given_miss),
        mean_failing: ratio(&c.failing),
        mean_t2_voters: ratio(&c.relays),
    })
}

/// Node-2 detection rate of a single relay pair with an unconditioned
/// Node-1 sample, the event the `phi` closed form describes.
pub fn simulate_relay_pair(params: &SystemParams, snr: Snr, hypothesis: Hypothesis, n_trials: u64, master_seed: u64) -> Result<SimEstimate> {
    let mut pair = params.clone();
    pair.n_nodes = 2;
    pair.n_clusters = 1;
    let setup = Setup::new(&pair, snr, hypothesis, Strategy::Cooperative, SimOptions::default())?;
    let c: Counts = run_trials(n_trials, |i, acc: &mut Counts| {
        let mut rng = TrialSeed::new(master_seed, i).rng();
        let y1 = setup.receive(&mut rng);
        acc.n += 1;
        acc.hits += setup.relay_decision(&mut rng, y1) as u64;
    });
    Ok(SimEstimate::proportion(c.hits, c.n))
}

/// Per-node baseline detection rate, pooled over all nodes and trials.
pub fn simulate_node_detection(params: &SystemParams, snr: Snr, hypothesis: Hypothesis, n_trials: u64, master_seed: u64) -> Result<SimEstimate> {
    let setup = Setup::new(params, snr, hypothesis, Strategy::Noncooperative, SimOptions::default())?;
    let c: Counts = run_trials(n_trials, |i, acc: &mut Counts| {
        let mut rng = TrialSeed::new(master_seed, i).rng();
        acc.n += setup.p.n_nodes as u64;
        acc.hits += setup.slot_votes(&mut rng, None) as u64;
    });
    Ok(SimEstimate::proportion(c.hits, c.n))
}

/// Exceedance rate of the closed-form distributed estimate over the
/// calibrated decision level.
pub fn simulate_ds_exceedance(params: &SystemParams, snr: Snr, hypothesis: Hypothesis, node_threshold: f64, n_trials: u64, master_seed: u64) -> Result<SimEstimate> {
    let opts = SimOptions {
        ds_node_threshold: Some(node_threshold),
        ..SimOptions::default()
    };
    let setup = Setup::new(params, snr, hypothesis, Strategy::Distributed, opts)?;
    let c: Counts = run_trials(n_trials, |i, acc: &mut Counts| {
        let mut rng = TrialSeed::new(master_seed, i).rng();
        acc.n += 1;
        acc.hits += (setup.ds_closed_form_estimate(&mut rng) > setup.ds_t) as u64;
    });
    Ok(SimEstimate::proportion(c.hits, c.n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyEstimate {
    /// Mean slots to first detection over uncensored trials.
    pub slots: SimEstimate,
    /// Trials that hit the slot cap without a detection.
    pub censored: u64,
    pub slot_cap: u64,
}

#[derive(Default)]
struct LatencyAcc {
    m: Moments,
    censored: u64,
    error: Option<String>,
}

impl Accumulator for LatencyAcc {
    fn merge(&mut self, o: Self) {
        self.m.merge(&o.m);
        self.censored += o.censored;
        if self.error.is_none() {
            self.error = o.error;
        }
    }
}

/// Slots until the first fusion-center detection under H1.
pub fn simulate_detection_latency(params: &SystemParams, snr: Snr, plan: &TrialPlan) -> Result<LatencyEstimate> {
    simulate_detection_latency_with(params, snr, plan, SimOptions::default())
}

pub fn simulate_detection_latency_with(
    params: &SystemParams,
    snr: Snr,
    plan: &TrialPlan,
    opts: SimOptions,
) -> Result<LatencyEstimate> {
    if plan.hypothesis != Hypothesis::H1 {
        return Err(crate::error::Error::InvalidParams(
            "detection latency is only defined under H1".into(),
        ));
    }
    let cap = opts.slot_cap.unwrap_or(DEFAULT_SLOT_CAP);
    let setup = Setup::new(params, snr, Hypothesis::H1, plan.strategy, opts)?;
    let acc: LatencyAcc = run_trials(plan.n_trials, |i, acc: &mut LatencyAcc| {
        let mut rng = TrialSeed::new(plan.master_seed, i).rng();
        let mut scratch = Vec::with_capacity(setup.p.n_nodes);
        let mut slots = 0u64;
        let detected = loop {
            if slots >= cap {
                break false;
            }
            match plan.strategy {
                Strategy::Noncooperative => {
                    slots += 1;
                    if setup.ncs_slot(&mut rng) {
                        break true;
                    }
                }
                Strategy::Cooperative => {
                    let c = setup.cs_cycle(&mut rng, &mut scratch);
                    slots += if c.t1 { 1 } else { 2 };
                    if c.t1 || c.t2 {
                        break true;
                    }
                }
                Strategy::Distributed => {
                    slots += setup.slots_per_ds_attempt;
                    match setup.ds_attempt(&mut rng) {
                        Ok(true) => break true,
                        Ok(false) => {}
                        Err(e) => {
                            acc.error.get_or_insert(e.to_string());
                            break false;
                        }
                    }
                }
            }
        };
        if detected {
            acc.m.push(slots as f64);
        } else {
            acc.censored += 1;
        }
    });
    if let Some(e) = acc.error {
        return Err(crate::error::Error::InvalidParams(e));
    }
    Ok(LatencyEstimate {
        slots: SimEstimate::from_moments(&acc.m),
        censored: acc.censored,
        slot_cap: cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySim {
    /// Total energy spent per detection attempt (one slot for NCS, one
    /// two-slot cycle for CS, K iterations for DS).
    pub total: SimEstimate,
    /// Mean energy per node per attempt.
    pub per_node_mean: Vec<f64>,
    /// Largest and smallest single-node energy seen within one slot
    /// (per iteration for DS).
    pub e_max: f64,
    pub e_min: f64,
    pub fairness_mu: f64,
}

#[derive(Default)]
struct EnergyAcc {
    total: Moments,
    per_node: Vec<f64>,
    e_max: f64,
    e_min: f64,
}

impl Accumulator for EnergyAcc {
    fn merge(&mut self, o: Self) {
        self.total.merge(&o.total);
        if self.per_node.is_empty() {
            self.per_node = o.per_node;
        } else {
            for (a, b) in self.per_node.iter_mut().zip(o.per_node) {
                *a += b;
            }
        }
        if self.total.n == o.total.n {
            // first non-empty merge
            self.e_max = o.e_max;
            self.e_min = o.e_min;
        } else if o.total.n > 0 {
            self.e_max = self.e_max.max(o.e_max);
            self.e_min = self.e_min.min(o.e_min);
        }
    }
}

/// Distance-weighted message accounting, per attempt, under H1.
///
/// NCS: every node reports to the fusion center. CS: nodes that detect in T1
/// report; nodes that miss relay one pair hop and report in T2. DS: every
/// node makes one path hop per iteration and each cluster's last node also
/// reports to the fusion center.
pub fn simulate_energy(params: &SystemParams, snr: Snr, plan: &TrialPlan) -> Result<EnergySim> {
    let setup = Setup::new(params, snr, Hypothesis::H1, Strategy::Noncooperative, SimOptions::default())?;
    let n = setup.p.n_nodes;
    let eta = setup.p.eta;
    if plan.strategy == Strategy::Cooperative {
        check_pairing(&setup.p)?;
    }
    if plan.strategy == Strategy::Distributed && n < 2 {
        return Err(crate::error::Error::InvalidParams(
            "distributed energy model needs n_nodes >= 2".into(),
        ));
    }
    let pair_hop = relay_hop(&setup.p);
    let ds_hop = path_hop(&setup.p);
    let k = iteration_count(&setup.p) as f64;
    let cluster = setup.p.cluster_size();
    let acc: EnergyAcc = run_trials(plan.n_trials, |i, acc: &mut EnergyAcc| {
        let mut rng = TrialSeed::new(plan.master_seed, i).rng();
        let mut node = vec![0.0; n];
        let mut scratch = Vec::with_capacity(n);
        // per-slot normaliser for fairness
        let mut per_slot = 1.0;
        match plan.strategy {
            Strategy::Noncooperative => node.iter_mut().for_each(|e| *e = eta),
            Strategy::Cooperative => {
                setup.slot_votes(&mut rng, Some(&mut scratch));
                for (e, &(hit, _)) in node.iter_mut().zip(&scratch) {
                    *e = if hit { eta } else { eta * pair_hop + eta };
                }
            }
            Strategy::Distributed => {
                for (idx, e) in node.iter_mut().enumerate() {
                    let head = (idx + 1) % cluster == 0;
                    *e = k * (eta * ds_hop + if head { eta } else { 0.0 });
                }
                per_slot = k;
            }
        }
        let total: f64 = node.iter().sum();
        let (mx, mn) = node
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), &e| (a.max(e), b.min(e)));
        if acc.total.n == 0 {
            acc.e_max = mx / per_slot;
            acc.e_min = mn / per_slot;
            acc.per_node = vec![0.0; n];
        } else {
            acc.e_max = acc.e_max.max(mx / per_slot);
            acc.e_min = acc.e_min.min(mn / per_slot);
        }
        for (a, e) in acc.per_node.iter_mut().zip(&node) {
            *a += e;
        }
        acc.total.push(total);
    });
    let trials = acc.total.n as f64;
    Ok(EnergySim {
        total: SimEstimate::from_moments(&acc.total),
        per_node_mean: acc.per_node.iter().map(|s| s / trials).collect(),
        e_max: acc.e_max,
        e_min: acc.e_min,
        fairness_mu: acc.e_max / acc.e_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coop::coop_node2_detection;
    use crate::distributed::distributed_detection_probability;
    use crate::metrics::{energy_coop, energy_distributed};
    use crate::noncoop::noncoop_fusion;
    use crate::numerics::binomial_tail_exceeds_half;

    fn plan(n: u64, hyp: Hypothesis, strategy: Strategy) -> TrialPlan {
        TrialPlan {
            n_trials: n,
            master_seed: 20240601,
            hypothesis: hyp,
            strategy,
        }
    }

    fn params(n: usize) -> SystemParams {
        SystemParams {
            n_nodes: n,
            ..SystemParams::default()
        }
    }

    fn snr1() -> Snr {
        Snr::from_linear(1.0).unwrap()
    }

    #[test]
    fn single_node_false_alarm_is_alpha() {
        let est = simulate_detection(&params(1), snr1(), &plan(200_000, Hypothesis::H0, Strategy::Noncooperative)).unwrap();
        assert!(est.agrees_with(0.1, 3.0), "{est:?}");
    }

    #[test]
    fn five_node_majority_matches_closed_form() {
        let p = params(5);
        let est = simulate_detection(&p, snr1(), &plan(200_000, Hypothesis::H1, Strategy::Noncooperative)).unwrap();
        assert!(est.agrees_with(0.185_201_431_977_848, 3.0), "{est:?}");
        assert!(est.agrees_with(noncoop_fusion(&p, snr1()).unwrap().p_fusion, 3.0));
    }

    #[test]
    fn distributed_matches_closed_form() {
        let p = params(10);
        let est = simulate_detection(&p, snr1(), &plan(200_000, Hypothesis::H1, Strategy::Distributed)).unwrap();
        let expect = distributed_detection_probability(&p, snr1()).unwrap();
        assert!(est.agrees_with(expect, 3.0), "{est:?} vs {expect}");
        let fa = simulate_ds_exceedance(&p, snr1(), Hypothesis::H0, 2.5, 200_000, 9).unwrap();
        assert!(fa.agrees_with(0.1, 3.0), "{fa:?}");
    }

    #[test]
    fn incremental_estimator_agrees_with_closed_form_estimator() {
        let p = params(6);
        let mut cfg = DistributedConfig::calibrated(&p, 1.0).unwrap();
        cfg.max_passes = 4000;
        let pl = plan(3000, Hypothesis::H1, Strategy::Distributed);
        let a = simulate_detection(&p, snr1(), &pl).unwrap();
        let b = simulate_detection_with(
            &p,
            snr1(),
            &pl,
            SimOptions {
                ds_estimator: DsEstimator::Incremental(cfg),
                ..SimOptions::default()
            },
        )
        .unwrap();
        // Same draws; only estimates sitting within ~1e-3 of t can flip.
        assert!((a.mean - b.mean).abs() <= 3.0 / 3000.0, "{a:?} {b:?}");
    }

    #[test]
    fn relay_pair_matches_phi() {
        let p = SystemParams {
            relay_power: 1.0,
            relay_gain2: 1.0,
            ..params(2)
        };
        let expect = coop_node2_detection(&p, snr1()).unwrap();
        let est = simulate_relay_pair(&p, snr1(), Hypothesis::H1, 1_000_000, 5).unwrap();
        assert!(est.agrees_with(expect, 3.0), "{est:?} vs {expect}");
        let fa = simulate_relay_pair(&p, snr1(), Hypothesis::H0, 400_000, 6).unwrap();
        assert!(fa.agrees_with(p.alpha, 3.0), "{fa:?}");
    }

    #[test]
    fn coop_model_matched_matches_closed_form() {
        let p = SystemParams {
            relay_power: 1.0,
            ..params(10)
        };
        let a = coop_fusion(&p, snr1()).unwrap();
        let b = simulate_coop_breakdown(&p, snr1(), Hypothesis::H1, 400_000, 3, CoopProtocol::ModelMatched).unwrap();
        assert!(b.t1.agrees_with(a.p_fc_t1, 3.0));
        assert!(b.t2.agrees_with(a.p_fc_t2, 3.0), "{b:?} vs {a:?}");
        assert!(b.total.agrees_with(a.p_fc_total, 3.0));
        assert_eq!(b.mean_t2_voters, a.t2_voters as f64);
        assert!((b.mean_failing - a.n_prime).abs() < 0.02);
    }

    #[test]
    fn coop_event_literal_reports_random_counts() {
        let p = params(10);
        let b = simulate_coop_breakdown(&p, snr1(), Hypothesis::H1, 20_000, 3, CoopProtocol::EventLiteral).unwrap();
        assert!(b.mean_t2_voters <= 5.0);
        assert!(b.mean_failing_given_t1_miss >= b.mean_failing);
        assert!(b.total.mean >= b.t1.mean);
    }

    #[test]
    fn coop_t1_false_alarm() {
        let p = params(10);
        let b = simulate_coop_breakdown(&p, snr1(), Hypothesis::H0, 200_000, 4, CoopProtocol::ModelMatched).unwrap();
        assert!(b.t1.agrees_with(binomial_tail_exceeds_half(10, 0.1), 3.0));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = params(10);
        let pl = plan(5000, Hypothesis::H1, Strategy::Cooperative);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        simulate_detection(&p, snr1(), &pl).unwrap(),
                        simulate_detection_latency(&p, snr1(), &pl).unwrap(),
                        simulate_energy(&p, snr1(), &pl).unwrap(),
                    )
                })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        assert_eq!(a.1.slots.mean.to_bits(), b.1.slots.mean.to_bits());
    }

    #[test]
    fn latency_at_certain_detection_is_one_slot() {
        let p = params(5);
        let pl = plan(1000, Hypothesis::H1, Strategy::Noncooperative);
        let l = simulate_detection_latency(&p, Snr::from_db(40.0).unwrap(), &pl).unwrap();
        assert_eq!(l.slots.mean, 1.0);
        assert_eq!(l.censored, 0);
    }

    #[test]
    fn latency_rejects_h0() {
        let pl = plan(10, Hypothesis::H0, Strategy::Noncooperative);
        assert!(simulate_detection_latency(&params(5), snr1(), &pl).is_err());
    }

    #[test]
    fn latency_censoring_is_reported() {
        let p = params(20);
        let pl = plan(50, Hypothesis::H1, Strategy::Noncooperative);
        let opts = SimOptions {
            slot_cap: Some(3),
            ..SimOptions::default()
        };
        let l = simulate_detection_latency_with(&p, Snr::from_db(-10.0).unwrap(), &pl, opts).unwrap();
        assert!(l.censored > 40);
    }

    #[test]
    fn distributed_latency_composes_cluster_slots() {
        // N=12, N_c=3 -> N_s=4; K=2; choose SNR where p_d is near one half.
        let p = SystemParams {
            n_nodes: 12,
            n_clusters: 3,
            theta_init: -1.0,
            grad_bound: 1.0,
            ..SystemParams::default()
        };
        let snr = Snr::from_db(-5.0).unwrap();
        let pd = distributed_detection_probability(&p, snr).unwrap();
        let pl = plan(100_000, Hypothesis::H1, Strategy::Distributed);
        let l = simulate_detection_latency(&p, snr, &pl).unwrap();
        let expect = 8.0 / pd;
        assert!(l.slots.agrees_with(expect, 3.0), "{:?} vs {expect}", l.slots);
        assert!(l.slots.mean >= 8.0);
    }

    #[test]
    fn energy_noncoop_is_flat() {
        let e = simulate_energy(&params(10), snr1(), &plan(100, Hypothesis::H1, Strategy::Noncooperative)).unwrap();
        assert!(e.per_node_mean.iter().all(|&x| x == 1.0));
        assert_eq!(e.fairness_mu, 1.0);
        assert_eq!(e.total.mean, 10.0);
    }

    #[test]
    fn energy_coop_matches_expectation() {
        let p = params(16);
        let e = simulate_energy(&p, snr1(), &plan(100_000, Hypothesis::H1, Strategy::Cooperative)).unwrap();
        let r = energy_coop(&p, snr1()).unwrap();
        assert!(e.total.agrees_with(r.total_energy, 3.0), "{:?} vs {}", e.total, r.total_energy);
        assert!((e.fairness_mu - r.fairness_mu).abs() < 1e-12);

        let hi = simulate_energy(&p, Snr::from_db(120.0).unwrap(), &plan(1000, Hypothesis::H1, Strategy::Cooperative)).unwrap();
        assert!((hi.total.mean - 16.0).abs() < 1e-9);
    }

    #[test]
    fn energy_distributed_matches_closed_form() {
        let p = SystemParams {
            n_nodes: 100,
            n_clusters: 10,
            hop_log_base: std::f64::consts::E,
            grad_bound: 1.0,
            ..SystemParams::default()
        };
        let e = simulate_energy(&p, snr1(), &plan(100, Hypothesis::H1, Strategy::Distributed)).unwrap();
        assert!((e.total.mean - 56.051_701_859_880_914).abs() < 1e-9);
        let r = energy_distributed(&p, 1).unwrap();
        assert!((e.fairness_mu - r.fairness_mu).abs() < 1e-12);
    }
}
