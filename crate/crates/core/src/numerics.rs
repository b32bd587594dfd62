//! Special functions and solvers used by the detectors.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error estimate {error_estimate:e})"
    )]
    QuadratureNonConvergence {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error(
        "target {target:e} not bracketed: f({lo:e}) = {f_lo:e}, f({hi:e}) = {f_hi:e}"
    )]
    Bracketing {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_subdivisions: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        RootBracket { lo, hi, tol: 1e-12 }
    }
}

/// Result of a truncated adaptive integration over `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error_estimate: f64,
    /// Upper limit the infinite integral was truncated at.
    pub upper: f64,
    /// Bound on the neglected tail beyond `upper`.
    pub truncation_bound: f64,
    pub subdivisions: usize,
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive G7K15 on a finite interval.
fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64, usize), NumericError> {
    let (v, e) = gauss_kronrod_15(f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut subdivisions = 0;
    loop {
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            return Ok((value, error, subdivisions));
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(NumericError::QuadratureNonConvergence {
                estimate: value,
                error_estimate: error,
                subdivisions,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gauss_kronrod_15(f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        subdivisions += 1;
    }
}

/// `phi(t; a, b) = integral over h in [0, inf) of exp(-h - t / (a + b h))`.
///
/// The integrand is bounded by `exp(-h)`, so the range is cut where that
/// envelope drops below `abs_tol / 10`.
pub fn phi_detailed(
    t: f64,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadratureEstimate, NumericError> {
    if !(t >= 0.0) || !(a > 0.0) || !(b >= 0.0) {
        return Err(NumericError::InvalidArgument(format!(
            "phi requires t >= 0, a > 0, b >= 0 (got t={t}, a={a}, b={b})"
        )));
    }
    if t == 0.0 {
        // exp(-h) integrates to 1 exactly.
        return Ok(QuadratureEstimate {
            value: 1.0,
            error_estimate: 0.0,
            upper: f64::INFINITY,
            truncation_bound: 0.0,
            subdivisions: 0,
        });
    }
    if b == 0.0 {
        return Ok(QuadratureEstimate {
            value: (-t / a).exp(),
            error_estimate: 0.0,
            upper: f64::INFINITY,
            truncation_bound: 0.0,
            subdivisions: 0,
        });
    }
    let upper = (10.0 / cfg.abs_tol).ln();
    let integrand = |h: f64| (-h - t / (a + b * h)).exp();
    let (value, error_estimate, subdivisions) = integrate_adaptive(&integrand, 0.0, upper, cfg)?;
    // Neglected tail is at most exp(-upper) * exp(-t / (a + b * upper)).
    let truncation_bound = (-upper - t / (a + b * upper)).exp();
    Ok(QuadratureEstimate {
        value,
        error_estimate,
        upper,
        truncation_bound,
        subdivisions,
    })
}

pub fn phi(t: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64, NumericError> {
    phi_detailed(t, a, b, cfg).map(|q| q.value)
}

/// Survival function of an Erlang(n, 1) variable: `exp(-x) * sum_{k<n} x^k / k!`.
///
/// Below the mean the lower tail is summed and subtracted from one; above it
/// the Poisson terms are summed downwards from `k = n - 1`. Leading terms use
/// the saddle-point form of the Poisson pmf so large `n` keeps full precision.
pub fn erlang_survival(n: usize, x: f64) -> f64 {
    assert!(n >= 1, "erlang_survival needs n >= 1");
    assert!(x >= 0.0, "erlang_survival needs x >= 0, got {x}");
    if x == 0.0 {
        return 1.0;
    }
    if n == 1 {
        return (-x).exp();
    }
    if x < n as f64 {
        // P(Poisson(x) >= n) = pmf(n) * sum_j x^j / ((n+1)...(n+j))
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = n as f64;
        loop {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        (1.0 - ln_poisson_pmf(n, x).exp() * sum).clamp(0.0, 1.0)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in (1..n).rev() {
            term *= k as f64 / x;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        (ln_poisson_pmf(n - 1, x).exp() * sum).min(1.0)
    }
}

/// `ln(x^k e^-x / k!)` via the deviance `k ln(k/x) + x - k` and Stirling's
/// remainder.
fn ln_poisson_pmf(k: usize, x: f64) -> f64 {
    if k == 0 {
        return -x;
    }
    let kf = k as f64;
    let v = (kf - x) / x;
    let deviance = if v.abs() < 0.5 {
        x * ((1.0 + v) * v.ln_1p() - v)
    } else {
        kf * (kf / x).ln() + x - kf
    };
    -deviance - 0.5 * (std::f64::consts::TAU * kf).ln() - stirling_remainder(k)
}

/// `ln k! - (k ln k - k + ln(2 pi k) / 2)`.
fn stirling_remainder(k: usize) -> f64 {
    let kf = k as f64;
    if k <= 15 {
        return ln_factorial(k) - (kf * kf.ln() - kf + 0.5 * (std::f64::consts::TAU * kf).ln());
    }
    let r = 1.0 / (kf * kf);
    (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r * (1.0 / 1680.0 - r / 1188.0)))) / kf
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Probability that a Binomial(n, p) count strictly exceeds `floor(n / 2)`.
///
/// Ties on even `n` count as a failed vote. `n = 0` has no voters and returns 0.
pub fn binomial_tail_exceeds_half(n: usize, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if n == 0 || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    if n == 1 {
        return p;
    }
    let k0 = n / 2 + 1;
    if p > 0.5 {
        return (1.0 - binomial_upper_sum(n, 1.0 - p, n - k0 + 1)).clamp(0.0, 1.0);
    }
    binomial_upper_sum(n, p, k0).clamp(0.0, 1.0)
}

/// P(X >= k0) for X ~ Bin(n, p), summed term by term in log space.
fn binomial_upper_sum(n: usize, p: f64, k0: usize) -> f64 {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = ln_factorial(n) - ln_factorial(k0) - ln_factorial(n - k0);
    let mut total = 0.0;
    for k in k0..=n {
        total += (ln_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
        if k < n {
            ln_choose += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        }
    }
    total
}

/// Bisection for `f(x) = target` with `f` strictly decreasing on the bracket.
pub fn solve_monotone_decreasing<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    bracket: RootBracket,
) -> Result<f64, NumericError> {
    let RootBracket { mut lo, mut hi, tol } = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(NumericError::InvalidArgument(format!(
            "bad bracket [{lo}, {hi}] with tol {tol}"
        )));
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo < target || f_hi > target {
        return Err(NumericError::Bracketing {
            lo,
            hi,
            f_lo,
            f_hi,
            target,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grows the upper end geometrically from `start` until `f(hi) <= target`,
/// then bisects on `[0, hi]`.
pub(crate) fn solve_decreasing_from_zero<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    start: f64,
) -> Result<f64, NumericError> {
    let mut hi = start;
    let mut f_hi = f(hi);
    for _ in 0..200 {
        if f_hi <= target {
            return solve_monotone_decreasing(f, target, RootBracket::new(0.0, hi));
        }
        hi *= 2.0;
        f_hi = f(hi);
    }
    Err(NumericError::Bracketing {
        lo: 0.0,
        hi,
        f_lo: f(0.0),
        f_hi,
        target,
    })
}
