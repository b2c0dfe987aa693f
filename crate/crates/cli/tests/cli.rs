use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qsd"));
    c.env_remove("QSD_OUT_DIR");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("model.toml");
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const LOGISTIC: &str = "[model]\nr = 1\ngamma = 1.0\nb = [1.0]\nd = [0.0]\nc = [[1.0]]\n";

#[test]
fn solve_writes_normalized_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ref2d.toml");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "30"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let mut rdr = csv::Reader::from_path(dir.path().join("qsd.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["n_1", "n_2", "mass"]);
    let rows: Vec<(Vec<u64>, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (vec![r[0].parse().unwrap(), r[1].parse().unwrap()], r[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 30 * 29 / 2);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    let total: f64 = rows.iter().map(|r| r.1).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(dir.path().join("eta.csv").exists());

    let s = summary(dir.path());
    assert_eq!(s["command"], "solve");
    assert!(s["results"]["lambda0"].as_f64().unwrap() > 0.0);
    assert_eq!(s["config"]["truncation"]["N"], 30);
    assert_eq!(s["config"]["solver"]["tol"], 1e-12);
    assert!(s["version"].is_string());
}

#[test]
fn neutral_three_types_fail_h2_pass_thm2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("neutral3d.toml");
    let o = run(&["check", "--config", cfg.to_str().unwrap(), "--nmax", "10000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reports: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("assumptions.json")).unwrap()).unwrap();
    let verdict = |h: &str| {
        reports
            .iter()
            .find(|r| r["hypothesis"] == h)
            .map(|r| r["verdict"].as_str().unwrap().to_string())
            .unwrap()
    };
    assert_eq!(verdict("H2"), "fail");
    assert_eq!(verdict("Thm2"), "pass-on-range");
    let drift: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("drift.json")).unwrap()).unwrap();
    assert!(drift["pointwise"]["verdict"].is_string());
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let cfg = config("ref2d.toml");
    let runs: Vec<tempfile::TempDir> = ["1", "1", "4"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let o = run(
                &[
                    "simulate", "--config", cfg.to_str().unwrap(), "--t", "3", "--traj", "100000", "--seed", "42",
                    "--threads", threads,
                ],
                dir.path(),
            );
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            dir
        })
        .collect();
    for name in ["law.csv", "summary.json"] {
        let first = fs::read(runs[0].path().join(name)).unwrap();
        for r in &runs[1..] {
            assert_eq!(first, fs::read(r.path().join(name)).unwrap(), "{name} differs");
        }
    }
    let s = summary(runs[0].path());
    assert_eq!(s["seed"], 42);
    assert!(s["results"]["tv_to_exact"].as_f64().unwrap() < 0.05);
}

#[test]
fn validation_errors_exit_1_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        (LOGISTIC.replace("gamma = 1.0", "gamma = 0.0"), "model.gamma"),
        (format!("{LOGISTIC}beta2 = 1.5\n"), "model.beta2"),
        (format!("{LOGISTIC}[simulation]\nx0 = [0]\n"), "simulation.x0"),
        (format!("{LOGISTIC}[solver]\ntolerance = 1e-9\n"), "tolerance"),
    ] {
        let cfg = write_config(dir.path(), &text);
        let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "10"], &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(1), "{key}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "{key}: {}", stderr(&o));
    }
    let cfg = write_config(dir.path(), LOGISTIC);
    let o = run(&["solve", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("truncation.N"));
    let o = run(&["solve", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{LOGISTIC}[solver]\nmax_iter = 3\n"));
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "40"], &dir.path().join("a"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let cfg = write_config(dir.path(), LOGISTIC);
    let o = run(
        &["simulate", "--config", cfg.to_str().unwrap(), "--t", "200", "--traj", "5"],
        &dir.path().join("b"),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no surviving trajectory"));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--config", "/nonexistent/model.toml"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let cfg = write_config(dir.path(), LOGISTIC);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--trunc", "10"], &blocker);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LOGISTIC);
    let target = dir.path().join("env-out");
    let o = bin()
        .args(["solve", "--config", cfg.to_str().unwrap(), "--trunc", "10"])
        .env("QSD_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(target.join("qsd.csv").exists());
}

#[test]
fn converge_and_certify_documents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("logistic1d.toml");
    let o = run(&["converge", "--config", cfg.to_str().unwrap(), "--t-max", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("tv.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["t", "value", "initial"]);
    assert!(rdr.records().all(|r| {
        let v: f64 = r.unwrap()[1].parse().unwrap();
        (0.0..=1.0).contains(&v)
    }));
    let s = summary(dir.path());
    assert_eq!(s["results"]["survival_nonincreasing"], true);
    let plateau = csv::Reader::from_path(dir.path().join("plateau.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(plateau, vec!["t", "value"]);

    let o = run(&["certify", "--config", cfg.to_str().unwrap(), "--t0", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert!(cert["c1"].as_f64().unwrap() > 0.0);
    assert!(cert["c2"].as_f64().unwrap() > 0.0);
    assert!(cert["resolution_gap"].as_f64().unwrap() < 1e-9);
}

#[test]
fn fv_and_qprocess_write_laws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("logistic1d.toml");
    let o = run(&["fv", "--config", cfg.to_str().unwrap(), "--particles", "500", "--t", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let total: f64 = csv::Reader::from_path(dir.path().join("fv_law.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap()[1].parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);

    let o = run(&["qprocess", "--config", cfg.to_str().unwrap(), "--t", "500"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(dir.path());
    assert!(s["results"]["max_row_sum"].as_f64().unwrap() < 1e-10);
    assert!(dir.path().join("occupation.csv").exists());
}
