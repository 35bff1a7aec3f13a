use std::path::Path;
use std::process::{Command, Output};

use gausteer::formats::{read_cm, read_directions, read_samples};
use gausteer::report::read_sweep_json;
use serde_json::Value;

fn gausteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gausteer"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_then_analyze_squeezed_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("svs.csv");
    let out = gausteer(&["gen", "--family", "svs", "--r", "0.5", "--out", p(&cm)]);
    assert!(out.status.success());
    assert_eq!(read_cm(&cm).unwrap().modes(), 2);

    let report = json(&gausteer(&["analyze", "--cm", p(&cm), "--partition", "1:1"]));
    assert_eq!(report["steerable"], true);
    let g = report["measure"].as_f64().unwrap();
    assert!((g - 1f64.cosh().ln()).abs() < 1e-9);
    let w = report["minimal_witness_value"].as_f64().unwrap();
    assert!((w - 1.0 / 1f64.cosh()).abs() < 1e-9);
}

#[test]
fn gen_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ghz.toml");
    std::fs::write(&cfg, "family = \"ghz\"\na = 2.0\n").unwrap();
    let cm = dir.path().join("ghz.csv");
    assert!(gausteer(&["gen", "--config", p(&cfg), "--out", p(&cm)]).status.success());
    let report = json(&gausteer(&["analyze", "--cm", p(&cm), "--partition", "1:2"]));
    assert_eq!(report["steerable"], true);
    assert_eq!(report["schur_symplectic_eigenvalues"].as_array().unwrap().len(), 2);
}

#[test]
fn detect_emits_full_record() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("svs.csv");
    assert!(gausteer(&["gen", "--family", "svs", "--r", "1.0", "--out", p(&cm)]).status.success());

    let record = json(&gausteer(&["--seed", "3", "detect", "--cm", p(&cm), "--partition", "1:1"]));
    assert_eq!(record["detected"], true);
    let used = record["settings_used"].as_u64().unwrap();
    assert!(used <= 10);
    assert_eq!(record["directions"].as_array().unwrap().len() as u64, used);
    assert_eq!(record["rounds"].as_array().unwrap().len() as u64, used - 1);
    assert!(record["final_value"].as_f64().unwrap() < 1.0);
    assert!(record["witness"]["z"].as_array().unwrap().len() == 4);

    let again = json(&gausteer(&["--seed", "3", "detect", "--cm", p(&cm), "--partition", "1:1"]));
    assert_eq!(record, again);

    let csv = gausteer(&["detect", "--cm", p(&cm), "--partition", "1:1", "--emit", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("settings,status,value,error,retried\n"));

    let noisy = json(&gausteer(&[
        "detect", "--cm", p(&cm), "--partition", "1:1", "--variance-source", "simulated:100000",
    ]));
    assert!(noisy["rounds"].as_array().unwrap().iter().any(|r| r["error"].is_number()));
}

#[test]
fn sweep_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (path, workers) in [(&a, "1"), (&b, "3")] {
        let out = gausteer(&[
            "--seed", "9", "--workers", workers, "--out", p(path), "sweep", "--family", "random2", "--samples", "40",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let result = read_sweep_json(&a).unwrap();
    assert_eq!(result.total_count() as usize, 40 - result.solver_failures);

    let csv = gausteer(&["--format", "csv", "sweep", "--family", "svs", "--samples", "20", "--edges", "0,1,4"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("measure_bin_lo,measure_bin_hi,settings,count,fraction"));
    let total: u64 = lines.map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 20);
}

#[test]
fn stats_propagates_errors() {
    let v = json(&gausteer(&["stats", "--coefficients", "1", "--variances", "1", "--repetitions", "3"]));
    assert!((v["delta_z"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(v["z_bar"].as_f64().unwrap(), 1.0);
}

#[test]
fn sample_writes_outcomes_and_directions() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("vac.csv");
    std::fs::write(&cm, "# modes=2\n1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n").unwrap();
    let samples = dir.path().join("s.csv");
    let dirs = dir.path().join("d.json");
    let out = gausteer(&[
        "--out", p(&samples), "sample", "--cm", p(&cm), "--settings", "4", "--repetitions", "2000",
        "--directions-out", p(&dirs),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sets = read_samples(&samples).unwrap();
    assert_eq!(sets.len(), 4);
    for set in &sets {
        assert_eq!(set.samples.len(), 2000);
        let v = gausteer_core::homodyne::sample_variance(set).unwrap();
        assert!((v - 1.0).abs() < 0.15, "{v}");
    }
    assert_eq!(read_directions(&dirs).unwrap().len(), 4);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("svs.csv");
    assert!(gausteer(&["gen", "--family", "svs", "--r", "0.5", "--out", p(&cm)]).status.success());
    assert_eq!(gausteer(&["analyze", "--cm", p(&cm), "--partition", "1:2"]).status.code(), Some(2));
    assert_eq!(gausteer(&["analyze", "--cm", p(&cm), "--partition", "x"]).status.code(), Some(2));
    assert_eq!(gausteer(&["analyze", "--cm", "/nonexistent.csv", "--partition", "1:1"]).status.code(), Some(2));
    assert_eq!(gausteer(&["gen", "--family", "svs"]).status.code(), Some(2));
    assert_eq!(gausteer(&["sweep", "--family", "svs", "--samples", "0"]).status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# modes=1\n0.1,0\n0,0.1\n").unwrap();
    assert_eq!(gausteer(&["analyze", "--cm", p(&bad), "--partition", "1:1"]).status.code(), Some(2));
    let tol = dir.path().join("tol.toml");
    std::fs::write(&tol, "[tolerance]\ndetection = 1e-6\n").unwrap();
    assert_eq!(
        gausteer(&["--tol-file", p(&tol), "analyze", "--cm", p(&cm), "--partition", "1:1"]).status.code(),
        Some(2)
    );
    assert_eq!(gausteer(&["--help"]).status.code(), Some(0));
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("svs.csv");
    assert!(gausteer(&["gen", "--family", "svs", "--r", "0.5", "--out", p(&cm)]).status.success());
    let tol = dir.path().join("tol.toml");
    std::fs::write(&tol, "[solver]\nmax_iterations = 1\n").unwrap();
    let t = p(&tol);
    assert_eq!(gausteer(&["--tol-file", t, "detect", "--cm", p(&cm), "--partition", "1:1"]).status.code(), Some(3));
    let out = dir.path().join("sweep.json");
    let code = gausteer(&["--tol-file", t, "--out", p(&out), "sweep", "--family", "svs", "--samples", "5"]).status.code();
    assert_eq!(code, Some(3));
    assert_eq!(read_sweep_json(&out).unwrap().solver_failures, 5);
}
