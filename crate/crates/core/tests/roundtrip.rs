use proptest::prelude::*;

use specsense::experiment::{
    plot_script, read_csv, run_sweep, write_csv, Figure, SweepRow, SweepSpec, SweptParameter,
};
use specsense::metrics::Strategy;
use specsense::model::SystemParams;

fn sweep(param: SweptParameter, grid: Vec<f64>) -> specsense::experiment::SweepResult {
    let result = run_sweep(&SweepSpec::analytic(param, grid, SystemParams::default())).unwrap();
    assert!(result.errors.is_empty(), "{:?}", result.errors);
    result
}

fn csv_bytes(rows: &[SweepRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    buf
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) if x.is_infinite() || y.is_infinite() => x == y,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-11 * x.abs().max(f64::MIN_POSITIVE),
        _ => false,
    }
}

fn rows_close(a: &SweepRow, b: &SweepRow) -> bool {
    a.grid_param == b.grid_param
        && a.strategy == b.strategy
        && close(Some(a.grid_value), Some(b.grid_value))
        && close(a.p_node, b.p_node)
        && close(a.p_fusion, b.p_fusion)
        && close(a.p_fusion_sim, b.p_fusion_sim)
        && close(a.slots_paper, b.slots_paper)
        && close(a.slots_sim, b.slots_sim)
        && close(a.energy_total, b.energy_total)
        && close(a.fairness_mu, b.fairness_mu)
}

#[test]
fn csv_reemits_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let grid: Vec<f64> = (-10..=20).step_by(5).map(f64::from).collect();
    let result = sweep(SweptParameter::SnrDb, grid);
    let path = dir.path().join("a.csv");
    specsense::experiment::emit_csv(&result, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), result.rows.len());
    for (a, b) in result.rows.iter().zip(&back) {
        assert!(rows_close(a, b), "{a:?} vs {b:?}");
    }
    assert_eq!(csv_bytes(&back), std::fs::read(&path).unwrap());
}

#[test]
fn infinite_literal_latency_survives() {
    let result = sweep(SweptParameter::SnrDb, vec![20.0]);
    let cs = result.row(20.0, Strategy::Cooperative).unwrap();
    let bytes = csv_bytes(&result.rows);
    let back = read_csv_bytes(&bytes);
    let cs_back = back.iter().find(|r| r.strategy == Strategy::Cooperative).unwrap();
    assert!(close(cs.slots_paper, cs_back.slots_paper));
}

fn read_csv_bytes(bytes: &[u8]) -> Vec<SweepRow> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, bytes).unwrap();
    read_csv(&path).unwrap()
}

#[test]
fn wrong_header_is_rejected() {
    let bytes = b"grid_param,grid_value\nsnr_db,0\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, bytes).unwrap();
    assert!(read_csv(&path).is_err());
}

#[test]
fn snr_sweep_supports_every_figure() {
    let result = sweep(SweptParameter::SnrDb, vec![-5.0, 0.0, 5.0]);
    for fig in Figure::ALL {
        let s = plot_script(&result, fig, "sweep.csv").unwrap();
        assert!(s.contains("set datafile separator ','"));
        assert!(s.contains(&format!("set output '{}.png'", fig.name())));
        for st in Strategy::ALL {
            assert!(s.contains(&format!("eq '{}'", st.code())), "{s}");
        }
        assert!(!s.contains("(simulated)"));
    }
    assert!(plot_script(&result, Figure::Fig2, "sweep.csv").unwrap().contains("set logscale y"));
}

#[test]
fn missing_column_is_an_error() {
    let mut spec = SweepSpec::analytic(SweptParameter::NNodes, vec![10.0, 20.0], SystemParams::default());
    spec.metrics = vec![specsense::experiment::Metric::Energy];
    let result = run_sweep(&spec).unwrap();
    assert!(Figure::Fig3.supported_by(&result) && Figure::Fig4.supported_by(&result));
    assert!(!Figure::Fig5.supported_by(&result));
    assert!(!Figure::Fig2.supported_by(&result));
    assert!(plot_script(&result, Figure::Fig2, "sweep.csv").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn numbers_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let s = specsense::experiment::format_number(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-11 * v.abs());
    }
}
