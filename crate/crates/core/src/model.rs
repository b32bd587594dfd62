//! Scenario parameters and the per-slot signal model.
//!
//! Every node receives `y_i = P * theta * h_pi + w_i`, with `h_pi` and `w_i`
//! independent circular complex Gaussians. Samplers are calibrated to the
//! exponential tails used by the detectors: `P(|x|^2 > t) = exp(-t / (2 sigma^2))`,
//! so each real component has variance `sigma^2` and `E|x|^2 = 2 sigma^2`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Primary user indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Primary user absent (theta = 0).
    H0,
    /// Primary user present (theta = 1).
    H1,
}

impl Hypothesis {
    pub fn theta(self) -> f64 {
        match self {
            Hypothesis::H0 => 0.0,
            Hypothesis::H1 => 1.0,
        }
    }
}

/// Signal-to-noise ratio, stored linear.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Snr(f64);

impl Snr {
    pub fn from_linear(linear: f64) -> Result<Self> {
        if !(linear >= 0.0) || !linear.is_finite() {
            return Err(Error::InvalidParams(format!(
                "snr must be finite and nonnegative, got {linear}"
            )));
        }
        Ok(Snr(linear))
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::from_linear(10f64.powf(db / 10.0))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

/// All scenario constants shared by the three strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Number of sensor nodes N.
    pub n_nodes: usize,
    /// Channel-gain variance (received signal power at unit transmit power).
    pub sigma_h2: f64,
    /// Noise variance.
    pub sigma_w2: f64,
    /// Target false-alarm probability.
    pub alpha: f64,
    /// Primary transmit power; the closed forms assume 1.
    pub primary_power: f64,
    /// Maximum relay power of the amplify-and-forward node.
    pub relay_power: f64,
    /// Mean squared inter-node gain inside a relay pair.
    pub relay_gain2: f64,
    /// Energy per unit transmission distance.
    pub eta: f64,
    /// Number of clusters for the distributed strategy; must divide `n_nodes`.
    pub n_clusters: usize,
    /// Subgradient bound c.
    pub grad_bound: f64,
    /// Starting point of the incremental estimate.
    pub theta_init: f64,
    /// Base of the logarithm in the distributed hop length `sqrt(log^2 N / N)`.
    pub hop_log_base: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            n_nodes: 20,
            sigma_h2: 1.0,
            sigma_w2: 1.0,
            alpha: 0.1,
            primary_power: 1.0,
            relay_power: 0.1,
            relay_gain2: 1.0,
            eta: 1.0,
            n_clusters: 1,
            grad_bound: 0.75,
            theta_init: 0.0,
            hop_log_base: 10.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        for (name, v) in [
            ("sigma_h2", self.sigma_h2),
            ("sigma_w2", self.sigma_w2),
            ("primary_power", self.primary_power),
            ("relay_power", self.relay_power),
            ("relay_gain2", self.relay_gain2),
            ("eta", self.eta),
            ("grad_bound", self.grad_bound),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !self.theta_init.is_finite() {
            return bad("theta_init must be finite".into());
        }
        if !(self.hop_log_base > 1.0 && self.hop_log_base.is_finite()) {
            return bad(format!(
                "hop_log_base must be finite and > 1, got {}",
                self.hop_log_base
            ));
        }
        if self.n_clusters == 0 || self.n_nodes % self.n_clusters != 0 {
            return bad(format!(
                "n_clusters = {} must be positive and divide n_nodes = {}",
                self.n_clusters, self.n_nodes
            ));
        }
        Ok(())
    }

    pub fn snr(&self) -> Snr {
        Snr(self.sigma_h2 / self.sigma_w2)
    }

    /// Same scenario with the channel variance rescaled to hit `snr`.
    pub fn with_snr(&self, snr: Snr) -> Self {
        SystemParams {
            sigma_h2: snr.linear() * self.sigma_w2,
            ..self.clone()
        }
    }

    /// Sensors per cluster, N_s = N / N_c.
    pub fn cluster_size(&self) -> usize {
        self.n_nodes / self.n_clusters
    }
}

/// Seed for one trial. Each trial owns a ChaCha stream, so results do not
/// depend on which worker thread runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub master: u64,
    pub trial: u64,
}

impl TrialSeed {
    pub fn new(master: u64, trial: u64) -> Self {
        TrialSeed { master, trial }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.trial);
        rng
    }
}

/// Circular complex Gaussian with per-component variance `sigma2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex64 {
    let s = sigma2.sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// One slot of fading, noise and received samples for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub hypothesis: Hypothesis,
    pub h_p: Vec<Complex64>,
    pub w: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl ChannelDraw {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `|y_i|^2` for every node, in node order.
    pub fn energies(&self) -> Vec<f64> {
        self.y.iter().map(|&y| energy_statistic(y)).collect()
    }
}

pub fn sample_channel(params: &SystemParams, hyp: Hypothesis, seed: TrialSeed) -> ChannelDraw {
    sample_channel_with(params, hyp, &mut seed.rng())
}

/// Draws `h_pi` then `w_i` for each node in index order.
pub fn sample_channel_with<R: Rng + ?Sized>(
    params: &SystemParams,
    hyp: Hypothesis,
    rng: &mut R,
) -> ChannelDraw {
    let n = params.n_nodes;
    let gain = params.primary_power * hyp.theta();
    let mut h_p = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let h = complex_gaussian(rng, params.sigma_h2);
        let noise = complex_gaussian(rng, params.sigma_w2);
        h_p.push(h);
        w.push(noise);
        y.push(h * gain + noise);
    }
    ChannelDraw {
        hypothesis: hyp,
        h_p,
        w,
        y,
    }
}

/// Energy detector statistic `|y|^2`.
#[inline]
pub fn energy_statistic(y: Complex64) -> f64 {
    y.norm_sqr()
}
