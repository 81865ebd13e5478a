use std::fs;
use std::process::{Command, Stdio};

use activesep::harness::{
    emit, parse, run_experiment, Emitter, ExperimentConfig, ExperimentKind, OutputFormat,
    CSV_HEADER,
};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk_default(kind);
    c.trials = 3;
    c.grid.truncate(3);
    c
}

fn csv_bytes(c: &ExperimentConfig) -> Vec<u8> {
    let mut em = Emitter::new(Vec::new(), OutputFormat::Csv).unwrap();
    for r in run_experiment(c).unwrap() {
        em.push(&r).unwrap();
    }
    em.finish().unwrap()
}

#[test]
fn file_round_trip_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let rows = run_experiment(&small(ExperimentKind::RpuVsN)).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 3);
    for fmt in [OutputFormat::Csv, OutputFormat::Jsonl] {
        let path = dir.path().join(format!("rows.{fmt:?}"));
        emit(&rows, fmt, &path).unwrap();
        let back = parse(fs::File::open(&path).unwrap(), fmt).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!((&a.experiment, a.seed, a.trial), (&b.experiment, b.seed, b.trial));
            assert_eq!((a.labels, a.comparisons, a.total, a.errors), (b.labels, b.comparisons, b.total, b.errors));
            assert!((a.grid - b.grid).abs() <= 1e-5 * a.grid.abs());
            assert!((a.metric - b.metric).abs() <= 1e-5 * a.metric.abs().max(1e-12));
        }
    }
    let text = fs::read_to_string(dir.path().join("rows.Csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert!(!text.contains('\r'));
}

#[test]
fn emit_reports_the_path() {
    let err = emit(&[], OutputFormat::Csv, "/nonexistent/dir/out.csv".as_ref()).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
}

#[test]
fn rows_ignore_worker_count() {
    for kind in ExperimentKind::ALL {
        let mut c = small(kind);
        if kind == ExperimentKind::GEstimate {
            c.trials = 20;
        }
        c.workers = Some(1);
        let one = csv_bytes(&c);
        c.workers = Some(4);
        assert_eq!(one, csv_bytes(&c), "{kind}");
    }
}

#[test]
fn reliable_kinds_report_no_errors() {
    for kind in [ExperimentKind::RpuVsN, ExperimentKind::RpuVsD, ExperimentKind::PointlocDepth] {
        let rows = run_experiment(&small(kind)).unwrap();
        assert!(rows.iter().all(|r| r.errors == 0 && !r.failed()), "{kind}");
        assert!(rows.iter().all(|r| r.total == r.labels + r.comparisons));
    }
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_activesep");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let status = Command::new(bin)
        .args(["mqs2d", "--trials", "2", "--seed", "5", "--out"])
        .arg(&out)
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1 + 2 * 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "schema_version = 1\nkind = \"mqs2d\"\ngrid = []\ntrials = 1\n[distribution]\nkind = \"uniform_ball\"\ndim = 2\n").unwrap();
    let status = Command::new(bin).args(["mqs2d", "--config"]).arg(&bad).stderr(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let other = dir.path().join("other.toml");
    fs::write(&other, ExperimentConfig::desk_default(ExperimentKind::RpuVsN).to_toml().unwrap()).unwrap();
    let status = Command::new(bin).args(["mqs2d", "--config"]).arg(&other).stderr(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let status = Command::new(bin).args(["rpu_vs_n", "--workers", "0"]).stderr(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
