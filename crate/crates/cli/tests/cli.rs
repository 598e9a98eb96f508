use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vlx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlx"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("VLX_THREADS", "2")
        .output()
        .expect("run vlx")
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn psi0_of_zero_forcing_is_zero() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[psi0]\nf = [0.0, -1.0]\n");
    let out = vlx(d.path(), &["psi0", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = csv(&d.path().join("psi0.csv"));
    assert_eq!(h, ["f", "psi0"]);
    assert_eq!(rows[0], [0.0, 0.0]);
    assert!(rows[1][1] < 0.0 && rows[1][1] > -1.0);
}

#[test]
fn hitting_default_is_inverse_gaussian() {
    let d = tempfile::tempdir().unwrap();
    assert!(vlx(d.path(), &["hitting"]).status.success());
    let (_, rows) = csv(&d.path().join("hitting.csv"));
    assert_eq!(rows.len(), 6);
    for r in rows {
        let (b, q, lt) = (r[0], r[1], r[3]);
        let exact = (-b * (-1.0 + (1.0 + 2.0 * q).sqrt())).exp();
        assert!((lt - exact).abs() < 1e-12, "b {b} q {q}");
    }
    let s = json(&d.path().join("hitting.json"));
    assert!(s["results"]["closed_form_max_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn figure1_curves_and_ladder() {
    let d = tempfile::tempdir().unwrap();
    let out = vlx(d.path(), &["figure1", "--eps-ladder", "0.5,0.1,0.02,0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = csv(&d.path().join("figure1.csv"));
    assert_eq!(h, ["t", "psi_eps", "psi0"]);
    assert_eq!(rows.len(), 2001);
    // psi0 is constant on each half with a step at t = 1/2
    let before: Vec<f64> = rows.iter().filter(|r| r[0] < 0.5).map(|r| r[2]).collect();
    let after: Vec<f64> = rows.iter().filter(|r| r[0] > 0.5).map(|r| r[2]).collect();
    assert!(before.iter().all(|v| *v == before[0]) && after.iter().all(|v| *v == after[0]));
    assert!(before[0] < after[0] && after[0] < 0.0);
    assert!(rows.iter().all(|r| r[1] <= 0.0));

    let s = json(&d.path().join("figure1.json"));
    let r = &s["results"];
    assert_eq!(r["ladder_l1_decreasing"], Value::Bool(true));
    assert!(r["l1_rel"].as_f64().unwrap() < 0.05);
    assert_eq!(r["bounds"]["holds"], Value::Bool(true));
    assert_eq!(s["command"], "figure1");
    assert_eq!(s["seed"], 1);
    assert!(s["version"].is_string());
}

#[test]
fn figure1_grid_refinement() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(vlx(&a, &["figure1"]).status.success());
    assert!(vlx(&b, &["figure1", "--steps", "4000"]).status.success());
    let (_, coarse) = csv(&a.join("figure1.csv"));
    let (_, fine) = csv(&b.join("figure1.csv"));
    let gap = coarse.iter().enumerate().map(|(j, r)| (r[1] - fine[2 * j][1]).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-3, "sup difference {gap}");
}

#[test]
fn identical_runs_are_byte_identical_and_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "seed = 5\n[mc]\nn_paths = 2000\ndt = 0.01\n");
    let (a, b, c) = (d.path().join("a"), d.path().join("b"), d.path().join("c"));
    let cfg = cfg.to_str().unwrap();
    assert!(vlx(&a, &["mc-validate", "--config", cfg]).status.success());
    assert!(vlx(&b, &["mc-validate", "--config", cfg]).status.success());
    let read = |p: &Path| std::fs::read(p.join("mc-validate.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    // the JSON summary is itself a valid config
    let echo = a.join("mc-validate.json");
    assert!(vlx(&c, &["mc-validate", "--config", echo.to_str().unwrap()]).status.success());
    assert_eq!(read(&a), read(&c));
    assert_eq!(json(&echo)["seed"], 5);
}

#[test]
fn mc_validate_reports_every_check() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[mc]\nn_paths = 4000\ndt = 0.01\n");
    let out = vlx(d.path(), &["mc-validate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.path().join("mc-validate.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")), "{text}");
}

#[test]
fn csv_has_seventeen_significant_digits() {
    let d = tempfile::tempdir().unwrap();
    assert!(vlx(d.path(), &["ml-eval"]).status.success());
    let text = std::fs::read_to_string(d.path().join("ml-eval.csv")).unwrap();
    let cell = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    let mantissa = cell.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

#[test]
fn json_format_embeds_table() {
    let d = tempfile::tempdir().unwrap();
    assert!(vlx(d.path(), &["ml-eval", "--format", "json"]).status.success());
    assert!(!d.path().join("ml-eval.csv").exists());
    let s = json(&d.path().join("ml-eval.json"));
    assert_eq!(s["data"]["columns"][0], "z");
    let first = &s["data"]["rows"][0];
    assert_eq!(first[0].as_f64(), Some(0.0));
    // E_{0.7,0.7}(0) = 1 / Gamma(0.7)
    assert!((first[1].as_f64().unwrap() - 0.770_383_183_866_565_5).abs() < 1e-14);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(vlx(d.path(), &["figure1", "--steps", "3"]).status.code(), Some(2));
    assert_eq!(vlx(d.path(), &["figure1", "--eps-ladder", "0.1,0.5"]).status.code(), Some(2));
    let bad = write_config(d.path(), "[vie]\nalpah = 0.7\n");
    assert_eq!(vlx(d.path(), &["vie-solve", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let bad = write_config(d.path(), "[vie]\nalpha = 1.5\n");
    let out = vlx(d.path(), &["vie-solve", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    let bad = write_config(d.path(), "[vie]\nscheme = \"euler\"\n");
    assert_eq!(vlx(d.path(), &["vie-solve", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    // an unreachable defect tolerance is a numerical failure
    let strict = write_config(d.path(), "[vie]\ntol = 0.0\n");
    assert_eq!(vlx(d.path(), &["vie-solve", "--config", strict.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(vlx(d.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn vie_solve_writes_curve() {
    let d = tempfile::tempdir().unwrap();
    let out = vlx(d.path(), &["vie-solve", "--steps", "400"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = csv(&d.path().join("vie-solve.csv"));
    assert_eq!(h, ["t", "psi"]);
    assert_eq!(rows.len(), 401);
    let s = json(&d.path().join("vie-solve.json"));
    assert!(s["results"]["max_defect"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn mgf_ladder_approaches_limit() {
    let d = tempfile::tempdir().unwrap();
    assert!(vlx(d.path(), &["mgf", "--eps-ladder", "1,0.1,0.01,0.001"]).status.success());
    let (_, rows) = csv(&d.path().join("mgf.csv"));
    assert!(rows.windows(2).all(|w| w[1][3] < w[0][3]));
    assert!(rows[3][3] < 0.02);
}
