use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlat"))
        .args(args)
        .output()
        .expect("run dlat")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const CONVERGE: &str = r#"{
  "command": "converge",
  "model": {"type": "gbm", "mu": 0.0, "sigma": 0.2},
  "distortion": {"family": "linear"},
  "payoff": {"type": "call", "s0": 100.0, "strike": 100.0},
  "grid": {"horizon": 1.0, "n_list": [125, 250, 500, 1000]},
  "reference": {"kind": "closed_form"}
}"#;

#[test]
fn converge_writes_csv_with_fixed_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", CONVERGE);
    let out = dir.path().join("out.csv");
    let r = dlat(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,delta,h,a,value,reference,gap,truncated_mass,runtime_ms"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let last = &rows[3];
    assert_eq!(last[0], 1000.0);
    assert!((last[5] - 7.965_567_455_405_796).abs() < 1e-12);
    assert!(last[6] <= 0.03);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", CONVERGE);
    let a = dlat(&["converge", "--config", &cfg]);
    let b = dlat(&["converge", "--config", &cfg]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn price_emits_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"model": {"type": "tailcgmy", "mu": 0.0, "sigma": 0.2, "c": 0.01, "g": 5.0, "m": 5.0, "y": 0.5},
            "distortion": {"family": "convex_cgmy", "gamma": 2.0},
            "payoff": {"type": "upin_call", "s0": 100.0, "barrier": 115.0, "strike": 100.0},
            "grid": {"n_steps": 100}}"#,
    );
    let r = dlat(&["price", "--config", &cfg]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,delta,h,a,value,truncated_mass,runtime_ms");
    assert_eq!(lines.len(), 2);
    let value: f64 = lines[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!(value > 0.0 && value < 100.0);
    let mass: f64 = lines[1].split(',').nth(5).unwrap().parse().unwrap();
    assert!(mass >= 0.0);
}

#[test]
fn tick_violation_exits_3_and_names_condition() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"model": {"type": "gbm", "mu": 0.0, "sigma": 0.2},
            "distortion": {"family": "linear"},
            "payoff": {"type": "call", "s0": 100.0, "strike": 100.0},
            "grid": {"n_steps": 100, "h": 0.05}}"#,
    );
    let r = dlat(&["price", "--config", &cfg]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("tick relation"));
}

#[test]
fn schema_violations_exit_2() {
    let dir = TempDir::new().unwrap();
    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"model": {"type": "gbm", "mu": 0.0, "sigma": 0.2, "nu": 1.0}}"#,
    );
    assert_eq!(
        dlat(&["price", "--config", &unknown]).status.code(),
        Some(2)
    );
    let top = write(dir.path(), "t.json", r#"{"colour": "blue"}"#);
    assert_eq!(dlat(&["check", "--config", &top]).status.code(), Some(2));
    let mismatch = write(dir.path(), "m.json", CONVERGE);
    assert_eq!(
        dlat(&["price", "--config", &mismatch]).status.code(),
        Some(2)
    );
    let bad_param = write(
        dir.path(),
        "b.json",
        r#"{"model": {"type": "gbm", "mu": 0.0, "sigma": -0.2},
            "distortion": {"family": "linear"},
            "payoff": {"type": "call", "s0": 100.0, "strike": 100.0},
            "grid": {"n_steps": 10}}"#,
    );
    assert_eq!(
        dlat(&["price", "--config", &bad_param]).status.code(),
        Some(2)
    );
    assert_eq!(
        dlat(&["price", "--config", "/nonexistent/config.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn check_suite_passes() {
    let r = dlat(&["check"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.starts_with("module,property,passed\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn couple_reports_domination_and_marginals() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "k.json",
        r#"{"coupling": {"first": {"type": "exponential", "rate": 1.0, "mass": 2.0},
                         "second": {"type": "exponential", "rate": 2.0, "mass": 1.0},
                         "n_paths": 10000}}"#,
    );
    let r = dlat(&["couple", "--config", &cfg, "--seed", "42"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(r.stdout.clone()).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row[2], "1");
        assert_eq!(row[9], "true");
    }
    let again = dlat(&["couple", "--config", &cfg, "--seed", "42"]);
    assert_eq!(r.stdout, again.stdout);

    let reversed = write(
        dir.path(),
        "r.json",
        r#"{"coupling": {"first": {"type": "exponential", "rate": 2.0, "mass": 1.0},
                         "second": {"type": "exponential", "rate": 1.0, "mass": 2.0},
                         "n_paths": 10}}"#,
    );
    assert_eq!(
        dlat(&["couple", "--config", &reversed]).status.code(),
        Some(3)
    );
}
