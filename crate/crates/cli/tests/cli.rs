use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sinhgordon_cli::records::{read_records, Record};

const BIN: &str = env!("CARGO_BIN_EXE_shg");

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn shg(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SHG_WORKERS").output().unwrap()
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    shg(&args)
}

fn without_timing(mut rs: Vec<Record>) -> Vec<Record> {
    rs.iter_mut().for_each(|r| r.wall_ms = 0);
    rs
}

const MASS: &str = "experiment = \"gmc-mass\"\n[params]\ngamma = 1.0\nmu = 1.0\n[estimator]\nn_samples = 500\n";

#[test]
fn lz_at_zero_alpha_records_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "lz.toml", "experiment = \"lz\"\n[params]\ngamma = 1.0\nmu = 1.0\n[options]\nalpha = 0.0\n");
    let out = d.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rs = read_records(&out.join("records.jsonl")).unwrap();
    assert_eq!(rs.len(), 1);
    assert!((rs[0].estimate - 1.0).abs() < 1e-10);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn unknown_key_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.toml", &format!("{MASS}[sampler]\nmodes = 4\n"));
    let o = run(&cfg, &d.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
}

#[test]
fn missing_config_file_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&d.path().join("nope.toml"), &d.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1() {
    let d = tempfile::tempdir().unwrap();
    // anchor outside the cylinder is only detected by the estimator
    let text = "experiment = \"two-point\"\n[params]\ngamma = 1.0\nmu = 1.0\n[sampler]\nn_modes = 8\ndt = 0.125\n\
                [options]\nalpha = 0.5\nt_half = 1.0\nanchor = -3.0\nseparations = [0.5]\n";
    let cfg = write(d.path(), "tp.toml", text);
    let o = run(&cfg, &d.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn identical_runs_give_identical_records() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "m.toml", MASS);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(run(&cfg, &a, &["--fast", "--seed", "5"]).status.success());
    assert!(run(&cfg, &b, &["--fast", "--seed", "5", "--workers", "2"]).status.success());
    let ra = without_timing(read_records(&a.join("records.jsonl")).unwrap());
    let rb = without_timing(read_records(&b.join("records.jsonl")).unwrap());
    assert_eq!(ra, rb);
    let c = d.path().join("c");
    assert!(run(&cfg, &c, &["--fast", "--seed", "6"]).status.success());
    let rc = without_timing(read_records(&c.join("records.jsonl")).unwrap());
    assert_ne!(ra, rc);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(c.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 6);
    assert_eq!(m["config"]["estimator"]["seed"], 6);
    assert_eq!(m["fast"], true);
}

#[test]
fn validate_passes_in_fast_mode() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "v.toml", "experiment = \"validate\"\n[params]\ngamma = 1.0\nmu = 1.0\n");
    let out = d.path().join("out");
    let o = run(&cfg, &out, &["--fast"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rs = read_records(&out.join("records.jsonl")).unwrap();
    assert_eq!(rs.len(), 30);
    assert!(rs.iter().all(|r| r.extra["pass"] == true));
}

#[test]
fn merge_combines_seeds() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "m.toml", MASS);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(run(&cfg, &a, &["--seed", "1"]).status.success());
    assert!(run(&cfg, &b, &["--seed", "2"]).status.success());
    let merged = d.path().join("merged.jsonl");
    let o = shg(&[
        "merge",
        a.join("records.jsonl").to_str().unwrap(),
        b.join("records.jsonl").to_str().unwrap(),
        "--out",
        merged.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ra = &read_records(&a.join("records.jsonl")).unwrap()[0];
    let rb = &read_records(&b.join("records.jsonl")).unwrap()[0];
    let m = read_records(&merged).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].n_samples, 1000);
    assert!((m[0].estimate - 0.5 * (ra.estimate + rb.estimate)).abs() < 1e-12);
    assert!(m[0].std_error < ra.std_error.max(rb.std_error));
}

#[test]
fn merge_rejects_mixed_parameters() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let b = d.path().join("b");
    assert!(run(&write(d.path(), "1.toml", MASS), &a, &["--fast"]).status.success());
    let other = MASS.replace("gamma = 1.0", "gamma = 0.5");
    assert!(run(&write(d.path(), "2.toml", &other), &b, &["--fast"]).status.success());
    let o = shg(&["merge", a.join("records.jsonl").to_str().unwrap(), b.join("records.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn curves_are_written() {
    let d = tempfile::tempdir().unwrap();
    let text = "experiment = \"partition\"\n[params]\ngamma = 1.0\nmu = 1.0\n[sampler]\ndt = 0.0625\n\
                [estimator]\nn_samples = 50\n[options]\nt_halves = [0.5, 1.0]\n";
    let out = d.path().join("out");
    let o = run(&write(d.path(), "p.toml", text), &out, &["--fast"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("partition.csv")).unwrap();
    assert!(csv.starts_with("t_half,z,z_se,log_z,log_z_se,boundary_ratio\n"));
    assert_eq!(csv.lines().count(), 3);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "partition.csv"));
    assert!(!m["coupling"].as_array().unwrap().is_empty());
}
