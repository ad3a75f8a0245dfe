use std::fs;
use std::path::Path;

use mtt_core::harness::{curve_file_name, emit_report, run_experiment, ExperimentConfig, FilterKind, ResultsTable};
use mtt_core::scenario::ScenarioSpec;

fn single_target_scenario(dir: &Path) -> std::path::PathBuf {
    let mut spec = ScenarioSpec::standard();
    spec.duration = 30;
    spec.targets.truncate(1);
    spec.targets[0].disappear = 30;
    spec.sensor.p_d = 1.0;
    spec.sensor.lambda = 0.0;
    let path = dir.join("single.json");
    fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    path
}

fn small_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        scenario: Some(single_target_scenario(dir)),
        runs: 2,
        seed: 5,
        clutter_rates: vec![0.0],
        n_detected: 600,
        n_undetected: 200,
        out_dir: dir.join("out"),
        timing: false,
        ..ExperimentConfig::default()
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn clean_single_target_is_tracked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        runs: 1,
        n_detected: 2500,
        n_undetected: 500,
        filters: vec![FilterKind::UAcphd, FilterKind::UAphd],
        ..small_config(dir.path())
    };
    let res = run_experiment(&cfg).unwrap();
    for c in &res.cells {
        assert_eq!(c.runs_used, 1);
        assert!(c.mean_ospa < 15.0, "{}: {}", c.filter.name(), c.mean_ospa);
    }
}

#[test]
fn report_files_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        clutter_rates: vec![0.0, 2.0],
        ..small_config(dir.path())
    };
    let res = run_experiment(&cfg).unwrap();
    emit_report(&res, &cfg.out_dir).unwrap();

    let summary = read(&cfg.out_dir.join("summary.csv"));
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "filter,lambda,mean_ospa,mean_loc,mean_card,time_mean_s,time_sd_s"
    );
    assert_eq!(lines.count(), 4 * 2);

    for cell in &res.cells {
        let text = read(&cfg.out_dir.join(curve_file_name(cell.filter, cell.lambda)));
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 30);
        let ospa: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
        let mean = ospa.iter().sum::<f64>() / ospa.len() as f64;
        assert!((mean - cell.mean_ospa).abs() < 1e-9);
        assert_eq!(cell.time_mean_s, None);
    }
    assert!(cfg.out_dir.join("plot_ospa_2.svg").exists());
}

#[test]
fn empty_results_give_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&ResultsTable::default(), dir.path()).unwrap();
    let text = read(&dir.path().join("summary.csv"));
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn unwritable_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    assert!(emit_report(&ResultsTable::default(), &file.join("sub")).is_err());
}

#[test]
fn identical_across_reruns_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        clutter_rates: vec![3.0],
        runs: 3,
        ..small_config(dir.path())
    };
    let a = run_experiment(&ExperimentConfig { threads: Some(1), ..base.clone() }).unwrap();
    let b = run_experiment(&ExperimentConfig { threads: Some(3), ..base.clone() }).unwrap();
    let c = run_experiment(&ExperimentConfig { threads: Some(1), ..base }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    for (x, y) in [(&a, dir.path().join("a")), (&b, dir.path().join("b"))] {
        emit_report(x, &y).unwrap();
    }
    for f in ["summary.csv", "curves_u-acphd_3.csv", "curves_smc-phd_3.csv"] {
        assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)));
    }
}
