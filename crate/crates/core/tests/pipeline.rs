use std::fs;

use dopo_core::config::{parse_config, parse_config_with, preset_document, render};
use dopo_core::experiment::{preset, run_experiment, ExperimentSpec, ParamOverrides, RunOptions, SweepEntry};
use dopo_core::output::write_outputs;

fn small_case_b(n: usize, times: Vec<f64>) -> ExperimentSpec {
    let mut spec = preset("case-b-desk").unwrap();
    spec.sweep.retain(|e| e.label == "gc_1");
    spec.n_trajectories = n;
    spec.sample_times = times;
    spec
}

#[test]
fn config_to_files_round_trip() {
    let spec = parse_config_with(
        &preset_document("superposition-desk"),
        &["n_trajectories=64".into(), "sample_times=[0, 5, 29]".into(), "outputs.distributions.times=[29]".into()],
    )
    .unwrap();
    assert_eq!(parse_config(&render(&spec)).unwrap(), spec);
    let result = run_experiment(&spec, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&result, dir.path()).unwrap();

    let series = fs::read_to_string(dir.path().join("series_superposition.csv")).unwrap();
    let header: Vec<&str> = series.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ["tau", "lambda", "n1", "n1_se", "n2", "n2_se", "var_p1", "var_p1_se", "var_p2", "var_p2_se"]);
    let rows: Vec<Vec<f64>> =
        series.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 5.0, 29.0]);
    // CSV values parse back to exactly what the run produced
    assert_eq!(rows, result.series[0].rows);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    let spec_back: ExperimentSpec = serde_json::from_value(meta["spec"].clone()).unwrap();
    assert_eq!(spec_back, spec);
    assert_eq!(meta["labels"][0]["distributions"].as_array().unwrap().len(), 4);
}

#[test]
fn standard_errors_scale_with_inverse_root_n() {
    let times: Vec<f64> = (4..=15).map(f64::from).collect();
    let big = run_experiment(&small_case_b(2400, times.clone()), &RunOptions::default()).unwrap();
    let small = run_experiment(&small_case_b(600, times), &RunOptions::default()).unwrap();
    let mut ratios = Vec::new();
    for c in ["n1_se", "corr_xx_se", "corr_pp_se", "epr_sum_se", "var_p1_se", "var_p2_se"] {
        let (a, b) = (big.series[0].column(c).unwrap(), small.series[0].column(c).unwrap());
        ratios.extend(a.iter().zip(&b).map(|(a, b)| b / a));
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!((median - 2.0).abs() <= 0.6, "median SE ratio {median}");
}

#[test]
fn common_random_numbers_share_noise() {
    let mut spec = small_case_b(50, vec![0.0, 2.0, 4.0]);
    let twin = SweepEntry { label: "twin".into(), overrides: spec.sweep[0].overrides };
    spec.sweep.push(twin);
    let independent = run_experiment(&spec, &RunOptions::default()).unwrap();
    assert_ne!(independent.series[0].rows, independent.series[1].rows);
    spec.common_random_numbers = true;
    let shared = run_experiment(&spec, &RunOptions::default()).unwrap();
    assert_eq!(shared.series[0].rows, shared.series[1].rows);
    assert_eq!(shared.metadata.labels[0].seed, shared.metadata.labels[1].seed);
}

#[test]
fn repeated_runs_are_identical() {
    let spec = small_case_b(80, vec![0.0, 3.0, 6.0]);
    let a = run_experiment(&spec, &RunOptions { threads: Some(2), progress: false }).unwrap();
    let b = run_experiment(&spec, &RunOptions { threads: Some(2), progress: false }).unwrap();
    assert_eq!(a.series, b.series);
    let mut other = spec.clone();
    other.master_seed += 1;
    let c = run_experiment(&other, &RunOptions::default()).unwrap();
    assert_ne!(a.series[0].rows[1], c.series[0].rows[1]);
}

#[test]
fn variants_share_the_vacuum_row() {
    use dopo_core::model::DopoVariant;
    for variant in [DopoVariant::Full10, DopoVariant::PumpEliminated6, DopoVariant::PathEliminated4] {
        let mut spec = small_case_b(20, vec![0.0, 0.5]);
        spec.variant = variant;
        spec.sweep[0].overrides = ParamOverrides { gamma_s: Some(0.5), gamma_c: Some(1.0), ..Default::default() };
        let r = run_experiment(&spec, &RunOptions::default()).unwrap();
        let s = &r.series[0];
        assert_eq!(s.at("epr_sum", 0.0).unwrap().value, 1.0, "{variant:?}");
        assert_eq!(s.at("discord", 0.0).unwrap().value, 0.0, "{variant:?}");
        assert!(s.at("n1", 0.5).unwrap().value.is_finite(), "{variant:?}");
    }
}
