//! Penalty sweeps at k = 6 on the twice refined mesh, p = 1.

use ucp_cli::report::SweepSeries;
use ucp_cli::{run, Experiment, ExperimentConfig};

fn sweep(extra: &[&str]) -> Vec<SweepSeries> {
    let mut o: Vec<String> = vec!["run.degrees=[1]".into(), "run.condition=false".into()];
    o.extend(extra.iter().map(|s| s.to_string()));
    let cfg = ExperimentConfig::preset(Experiment::Sweep).with_overrides(&o).unwrap();
    run(&cfg, Experiment::Sweep).unwrap().sweeps
}

#[test]
fn gamma1_error_has_an_interior_minimum() {
    let s = sweep(&["sweep.values=[1e-1, 1e-3, 1e-5, 1e-7, 1e-9, 1e-12]"]);
    let e: Vec<f64> = s[0].rows.iter().map(|r| r.relative).collect();
    let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min < e[0] && min < e[e.len() - 1], "{e:?}");
}

#[test]
fn alpha_barely_matters() {
    let s = sweep(&[
        "sweep.parameter=alpha",
        "sweep.values=[1e-6, 1e-4, 1e-2, 1e-1]",
        "stabilization.gamma_gls=1e-5",
    ]);
    let e: Vec<f64> = s[0].rows.iter().map(|r| r.relative).collect();
    let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo <= 10.0, "{e:?}");
}

#[test]
fn single_value_gives_single_row() {
    let s = sweep(&["sweep.values=[1e-5]"]);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].rows.len(), 1);
    assert!(s[0].to_csv().lines().count() == 2);
}
