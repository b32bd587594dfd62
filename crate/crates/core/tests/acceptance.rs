//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Two sub-claims are contradicted by the closed forms themselves (see
//! `KNOWN_FAILURES`). They are evaluated as stated and reported as FAIL; the
//! run exits nonzero if they ever start passing or if anything else fails.

use std::process::{Command, ExitCode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specsense::coop::{coop_fusion, coop_threshold};
use specsense::distributed::{
    calibrate_false_alarm, closed_form_estimate, distributed_analysis,
    distributed_detection_probability, incremental_pass, node_gradient, node_objective,
    DistributedConfig,
};
use specsense::experiment::{emit_csv, read_csv, run_sweep, SweepSpec, SweptParameter};
use specsense::metrics::{
    agility_coop, agility_distributed, agility_noncoop, energy_coop, energy_distributed,
    energy_noncoop, Strategy,
};
use specsense::model::{sample_channel, Hypothesis, Snr, SystemParams, TrialSeed};
use specsense::montecarlo::{
    simulate_coop_breakdown, simulate_detection, CoopProtocol, TrialPlan,
};
use specsense::noncoop::{false_alarm_tail, noncoop_fusion, noncoop_node_detection, noncoop_threshold};
use specsense::numerics::{binomial_tail_exceeds_half, phi, QuadratureConfig};

const SE_TOL: f64 = 3.0;
const CALIBRATION_TRIALS: u64 = 1_000_000;
const DETECTION_TRIALS: u64 = 1_000_000;
const SNR_GRID_DB: [f64; 6] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0];

/// Sub-claims the model contradicts; they must keep failing.
const KNOWN_FAILURES: [&str; 2] = ["6b", "8b"];

struct Part {
    id: &'static str,
    ok: bool,
    detail: String,
}

fn part(id: &'static str, ok: bool, detail: String) -> Part {
    Part { id, ok, detail }
}

fn db(v: f64) -> Snr {
    Snr::from_db(v).unwrap()
}

fn scenario(n: usize, alpha: f64) -> SystemParams {
    SystemParams {
        n_nodes: n,
        alpha,
        ..SystemParams::default()
    }
}

fn within(sim: &specsense::montecarlo::SimEstimate, expected: f64) -> (bool, String) {
    (
        sim.agrees_with(expected, SE_TOL),
        format!("{:.3e} vs {:.3e} (z {:+.2})", sim.mean, expected, sim.z_score(expected)),
    )
}

fn c1_calibration() -> Vec<Part> {
    let mut worst = (0.0f64, String::new());
    let mut ok = true;
    let mut seed = 100;
    for n in [10, 20] {
        for alpha in [0.05, 0.1] {
            let p = scenario(n, alpha).with_snr(db(0.0));
            let snr = p.snr();
            let majority = binomial_tail_exceeds_half(n, alpha);
            for strategy in Strategy::ALL {
                seed += 1;
                let (sim, expected) = match strategy {
                    Strategy::Cooperative => (
                        simulate_coop_breakdown(&p, snr, Hypothesis::H0, CALIBRATION_TRIALS, seed, CoopProtocol::ModelMatched)
                            .unwrap()
                            .t1,
                        majority,
                    ),
                    _ => {
                        let plan = TrialPlan {
                            n_trials: CALIBRATION_TRIALS,
                            master_seed: seed,
                            hypothesis: Hypothesis::H0,
                            strategy,
                        };
                        let expected = if strategy == Strategy::Distributed { alpha } else { majority };
                        (simulate_detection(&p, snr, &plan).unwrap(), expected)
                    }
                };
                let (good, d) = within(&sim, expected);
                ok &= good;
                let z = sim.z_score(expected).abs();
                if !good || z >= worst.0 {
                    worst = (z, format!("N={n} alpha={alpha} {strategy}: {d}"));
                }
            }
        }
    }
    vec![part("1", ok, format!("12 false-alarm rates, largest deviation {}", worst.1))]
}

fn c2_detection() -> Vec<Part> {
    let p0 = scenario(20, 0.1);
    let mut ok = true;
    let mut worst = (0.0f64, String::new());
    for (i, &d) in SNR_GRID_DB.iter().enumerate() {
        let p = p0.with_snr(db(d));
        let snr = p.snr();
        for strategy in Strategy::ALL {
            let analytic = match strategy {
                Strategy::Noncooperative => noncoop_fusion(&p, snr).unwrap().p_fusion,
                Strategy::Cooperative => coop_fusion(&p, snr).unwrap().p_fc_total,
                Strategy::Distributed => distributed_detection_probability(&p, snr).unwrap(),
            };
            let plan = TrialPlan {
                n_trials: DETECTION_TRIALS,
                master_seed: 2000 + 10 * i as u64 + strategy as u64,
                hypothesis: Hypothesis::H1,
                strategy,
            };
            let sim = simulate_detection(&p, snr, &plan).unwrap();
            let (good, detail) = within(&sim, analytic);
            ok &= good;
            let z = sim.z_score(analytic).abs();
            if !good || z >= worst.0 {
                worst = (z, format!("{d} dB {strategy}: {detail}"));
            }
        }
    }
    vec![part("2", ok, format!("18 grid points, largest deviation {}", worst.1))]
}

fn c3_degenerate() -> Vec<Part> {
    let tol = 1e-10;
    let mut err: f64 = 0.0;
    let one = scenario(1, 0.1);
    for d in [-10.0, -3.0, 0.0, 4.0, 12.0, 20.0] {
        let snr = db(d);
        err = err.max(
            (distributed_detection_probability(&one, snr).unwrap() - noncoop_node_detection(&one, snr)).abs(),
        );
    }
    let ds = err;
    let mut eq19: f64 = 0.0;
    for alpha in [0.01, 0.05, 0.1, 0.3] {
        for s2 in [0.5, 1.0, 2.0] {
            let p = SystemParams {
                sigma_w2: s2,
                ..scenario(1, alpha)
            };
            let pp = calibrate_false_alarm(&p).unwrap();
            eq19 = eq19
                .max((pp - noncoop_threshold(&p)).abs())
                .max((false_alarm_tail(&p, pp) - alpha).abs());
        }
    }
    let mut relay: f64 = 0.0;
    for alpha in [0.01, 0.1, 0.5] {
        let p = SystemParams {
            relay_power: 1e-15,
            ..scenario(20, alpha)
        };
        relay = relay.max((coop_threshold(&p).unwrap() + alpha.ln()).abs());
    }
    let cfg = QuadratureConfig::default();
    let mut phi0: f64 = 0.0;
    for t in [0.0, 0.3, 1.0, 4.6, 12.0] {
        for a in [0.5, 1.0, 3.0] {
            phi0 = phi0
                .max((phi(t, a, 0.0, &cfg).unwrap() - (-t / a).exp()).abs())
                .max((phi(t, a, 1e-13, &cfg).unwrap() - (-t / a).exp()).abs());
        }
    }
    let ok = ds < tol && eq19 < tol && relay < tol && phi0 < tol;
    vec![part(
        "3",
        ok,
        format!("max errors: DS N=1 {ds:.1e}, calibration N=1 {eq19:.1e}, relay threshold {relay:.1e}, phi b=0 {phi0:.1e}"),
    )]
}

fn c4_gradient() -> Vec<Part> {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut max_err: f64 = 0.0;
    for _ in 0..1000 {
        let y: f64 = rng.random_range(0.0..10.0);
        let t: f64 = rng.random_range(0.1..5.0);
        let theta: f64 = rng.random_range(-5.0..5.0);
        let h = 1e-5;
        let fd = (node_objective(y, t, theta + h) - node_objective(y, t, theta - h)) / (2.0 * h);
        max_err = max_err.max((fd - node_gradient(y, t, theta)).abs());
    }
    let grad_ok = max_err < 1e-6;

    let p = scenario(20, 0.1).with_snr(db(0.0));
    let cfg = DistributedConfig::calibrated(&p, 1.0).unwrap();
    let mut conv: f64 = 0.0;
    for trial in 0..100 {
        let draw = sample_channel(&p, Hypothesis::H1, TrialSeed::new(404, trial));
        let est = incremental_pass(&draw, &cfg, &p).unwrap().final_estimate;
        conv = conv.max((est - closed_form_estimate(&draw.energies(), 1.0)).abs());
    }
    let conv_ok = conv < 1e-3;
    vec![
        part("4a", grad_ok, format!("gradient vs central difference, max abs error {max_err:.2e} over 1000 instances")),
        part("4b", conv_ok, format!("incremental pass vs closed form, max abs error {conv:.2e} over 100 draws")),
    ]
}

fn c5_agility() -> Vec<Part> {
    let p = scenario(20, 0.1).with_snr(db(0.0));
    let snr = p.snr();
    let t_nc = agility_noncoop(&noncoop_fusion(&p, snr).unwrap()).unwrap().expected_slots;
    let cs = agility_coop(&coop_fusion(&p, snr).unwrap()).unwrap();
    let t_c = cs.renewal_slots.unwrap();
    let t_d = agility_distributed(&distributed_analysis(&p, snr).unwrap()).unwrap().expected_slots;
    let order = t_c < t_nc && t_nc < t_d;
    let mut floor_ok = true;
    let mut tightest = f64::INFINITY;
    for n in (10..=100).step_by(10) {
        let q = scenario(n, 0.1).with_snr(db(0.0));
        let a = distributed_analysis(&q, q.snr()).unwrap();
        let r = agility_distributed(&a).unwrap();
        let floor = (q.cluster_size() * a.k_iterations) as f64;
        floor_ok &= r.expected_slots >= floor;
        tightest = tightest.min(r.expected_slots / floor);
    }
    vec![
        part("5a", order, format!("T_c = {t_c:.3} < T_nc = {t_nc:.3} < T_d = {t_d:.3} slots (T_c literal {:.3})", cs.expected_slots)),
        part("5b", floor_ok, format!("T_d >= N_s K on N = 10..100, smallest ratio {tightest:.4}")),
    ]
}

fn c6_energy() -> Vec<Part> {
    let mut ds_ok = true;
    let mut margin = f64::INFINITY;
    for n in (10..=100).step_by(10) {
        let p = scenario(n, 0.1).with_snr(db(0.0));
        let k = distributed_analysis(&p, p.snr()).unwrap().k_iterations;
        let e_ds = energy_distributed(&p, k).unwrap().total_energy;
        let e_nc = energy_noncoop(&p).total_energy;
        ds_ok &= e_ds < e_nc;
        margin = margin.min(e_nc - e_ds);
    }
    let p = scenario(20, 0.1);
    let grid: Vec<f64> = (-10..=20).map(f64::from).collect();
    let energies: Vec<f64> = grid
        .iter()
        .map(|&d| energy_coop(&p, db(d)).unwrap().total_energy)
        .collect();
    let rising = energies.windows(2).all(|w| w[1] >= w[0]);
    vec![
        part("6a", ds_ok, format!("E_DS < E_NCS for N = 10..100 at 0 dB, smallest gap {margin:.3}")),
        part(
            "6b",
            rising,
            format!(
                "E_CS over -10..20 dB at N=20: {:.4} -> {:.4} ({})",
                energies[0],
                energies[energies.len() - 1],
                if rising { "nondecreasing" } else { "decreasing: fewer T1 misses means fewer relays" }
            ),
        ),
    ]
}

fn c7_fairness() -> Vec<Part> {
    let mut exact = true;
    let mut worst: f64 = 0.0;
    let mut order = true;
    for n in 2..=200usize {
        let p = scenario(n, 0.1);
        let nf = n as f64;
        let mu_nc = energy_noncoop(&p).fairness_mu;
        exact &= mu_nc == 1.0;
        let mu_ds = energy_distributed(&p, 1).unwrap().fairness_mu;
        worst = worst.max((mu_ds - (1.0 + nf.sqrt() / nf.log(p.hop_log_base))).abs());
        let natural = SystemParams {
            hop_log_base: std::f64::consts::E,
            ..p.clone()
        };
        let mu_ds_ln = energy_distributed(&natural, 1).unwrap().fairness_mu;
        worst = worst.max((mu_ds_ln - (1.0 + nf.sqrt() / nf.ln())).abs());
        order &= mu_nc < mu_ds && mu_nc < mu_ds_ln;
        if n % 2 == 0 {
            let mu_cs = energy_coop(&p, db(0.0)).unwrap().fairness_mu;
            worst = worst.max((mu_cs - (1.0 + nf.powf(-0.5))).abs());
            order &= mu_nc < mu_cs;
        }
    }
    let ok = exact && worst < 1e-12 && order;
    vec![part(
        "7",
        ok,
        format!("mu_NCS = 1 exactly: {exact}; closed-form max error {worst:.1e}; NCS fairest for N = 2..200: {order}"),
    )]
}

fn c8_robustness() -> Vec<Part> {
    let p0 = scenario(20, 0.1);
    let mut rows = Vec::new();
    for &d in &SNR_GRID_DB {
        let p = p0.with_snr(db(d));
        let snr = p.snr();
        rows.push((
            d,
            noncoop_fusion(&p, snr).unwrap().p_fusion,
            coop_fusion(&p, snr).unwrap().p_fc_total,
            distributed_detection_probability(&p, snr).unwrap(),
        ));
    }
    let low_ok = rows
        .iter()
        .filter(|r| r.0 <= 0.0)
        .all(|&(_, nc, c, d)| d >= c && c >= nc);
    let gaps: Vec<(f64, f64)> = rows.iter().map(|&(d, nc, c, _)| (d, c - nc)).collect();
    let rise = gaps.windows(2).find(|w| w[1].1 > w[0].1);
    let range = |f: fn(&(f64, f64, f64, f64)) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (r_nc, r_c, r_d) = (range(|r| r.1), range(|r| r.2), range(|r| r.3));
    vec![
        part("8a", low_ok, "p_DS >= p_CS >= p_NCS at -10, -5, 0 dB".to_string()),
        part(
            "8b",
            rise.is_none(),
            match rise {
                None => "CS-NCS gap nonincreasing".to_string(),
                Some(w) => format!(
                    "CS-NCS gap rises from {:.4} at {} dB to {:.4} at {} dB",
                    w[0].1, w[0].0, w[1].1, w[1].0
                ),
            },
        ),
        part("8c", r_d < r_c && r_d < r_nc, format!("p_fusion range NCS {r_nc:.4}, CS {r_c:.4}, DS {r_d:.4}")),
    ]
}

fn c9_reproducibility() -> Vec<Part> {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("repro.toml");
    std::fs::write(
        &config,
        r#"schema_version = 1

[system]
n_nodes = 20

[sweep]
swept_parameter = "snr_db"
grid = [-5.0, 0.0, 5.0]
strategies = ["NCS", "CS", "DS"]
validation = true
n_trials = 20000
seed = 99
"#,
    )
    .unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("out{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_specsense"))
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("SPECSENSE_THREADS", threads)
            .output()
            .unwrap();
        (status.status.code(), std::fs::read(out.join("sweep.csv")).unwrap_or_default())
    };
    let (code1, a) = run("1");
    let (code4, b) = run("4");
    let ok = !a.is_empty() && a == b && code1 == Some(0) && code4 == Some(0);
    vec![part(
        "9",
        ok,
        format!("SPECSENSE_THREADS=1 vs 4: {} bytes, identical: {}, exit codes {code1:?}/{code4:?}", a.len(), a == b),
    )]
}

fn c10_literal_vs_renewal() -> Vec<Part> {
    let mut spec = SweepSpec::analytic(SweptParameter::SnrDb, vec![0.0], scenario(20, 0.1));
    spec.strategies = vec![Strategy::Cooperative];
    spec.validation = true;
    spec.n_trials = 50_000;
    spec.seed = 10;
    let result = run_sweep(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cs.csv");
    emit_csv(&result, &path).unwrap();
    let back = read_csv(&path).unwrap();
    let row = &back[0];
    let both = row.slots_paper.is_some() && row.slots_sim.is_some();
    let report = result.validation.unwrap();
    let flag = report.flags().find(|c| c.quantity.contains("literal vs renewal"));
    let ok = both && flag.is_some_and(|c| c.note.contains('%'));
    vec![part(
        "10",
        ok,
        format!(
            "CSV slots_paper = {:?}, slots_sim = {:?}; report: {}",
            row.slots_paper,
            row.slots_sim,
            flag.map(|c| c.note.clone()).unwrap_or_else(|| "no flag".into())
        ),
    )]
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Vec<Part>); 10] = [
        ("calibration", c1_calibration),
        ("detection probability", c2_detection),
        ("degenerate equivalences", c3_degenerate),
        ("gradient and convergence", c4_gradient),
        ("agility orderings", c5_agility),
        ("energy orderings", c6_energy),
        ("fairness", c7_fairness),
        ("robustness", c8_robustness),
        ("reproducibility", c9_reproducibility),
        ("literal vs renewal latency surfaced", c10_literal_vs_renewal),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let parts = run();
        let ok = parts.iter().all(|p| p.ok);
        passed += ok as usize;
        println!("{} C{} {name}", if ok { "PASS" } else { "FAIL" }, k + 1);
        for p in &parts {
            let known = KNOWN_FAILURES.contains(&p.id);
            let tag = match (p.ok, known) {
                (true, false) => "ok",
                (false, true) => "fail (contradicted by the model)",
                (false, false) => "FAIL",
                (true, true) => "UNEXPECTED PASS",
            };
            println!("    [{}] {tag}: {}", p.id, p.detail);
            if p.ok == known {
                unexpected.push(p.id);
            }
        }
    }
    println!("{passed}/10 criteria pass");
    if unexpected.is_empty() {
        println!("all outcomes as expected; failing sub-claims: {}", KNOWN_FAILURES.join(", "));
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcomes: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
