use std::path::Path;
use std::process::{Command, Output};

fn speclab(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speclab"))
        .args(args)
        .env("SPECLAB_CACHE_DIR", cache)
        .output()
        .expect("run speclab")
}

const TORUS: &str = r#"
[model]
kind = "torus"
n = 2
K = 8
G = 33
"#;

const SWEEP: &str = r#"
quantity = "cluster-2q"
q = [6.0, inf]
[model]
kind = "torus"
n = 2
K = 8
G = 33
[lambda]
kind = "values"
values = [1.0, 1.5, 2.0]
"#;

#[test]
fn model_build_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("torus.toml");
    std::fs::write(&spec, TORUS).unwrap();
    let out = speclab(&["model", "build", "--spec", spec.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rank"], 289);

    let cache = dir.path().join("cache");
    let first = speclab(&["model", "cache", "--spec", spec.to_str().unwrap()], &cache);
    assert!(first.status.success());
    let v: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["cache"]["hit"], false);
    let second = speclab(&["model", "cache", "--spec", spec.to_str().unwrap()], &cache);
    let v: serde_json::Value = serde_json::from_slice(&second.stdout).unwrap();
    assert_eq!(v["cache"]["hit"], true);
    assert_eq!(v["rank"], 289);
}

#[test]
fn norms_prints_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("torus.toml");
    std::fs::write(&spec, TORUS).unwrap();
    let out = speclab(
        &["norms", "--spec", spec.to_str().unwrap(), "--lambda", "1.5", "--q", "inf"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["q"], "inf");
    // oracle: the window [1.5, 2.5] holds |k|² ∈ {4, 5}: 4 + 8 = 12 modes of
    // sup-norm (2π)^{-1}, so ||Π||_{2->∞} = sqrt(12)/(2π)
    let expected = 12f64.sqrt() / (2.0 * std::f64::consts::PI);
    let lower = v["bracket"]["lower"].as_f64().unwrap();
    assert!((lower - expected).abs() < 1e-9, "{lower} vs {expected}");
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SWEEP).unwrap();
    let out_dir = dir.path().join("out");
    let out = speclab(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = out_dir.join("report.json");
    let csv_dir = dir.path().join("csv");
    let out = speclab(
        &["report", "--in", json.to_str().unwrap(), "--format", "csv", "--out", csv_dir.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(csv_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let plot_dir = dir.path().join("plot");
    let out = speclab(
        &["report", "--in", json.to_str().unwrap(), "--format", "plotdata", "--out", plot_dir.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(std::fs::read_dir(&plot_dir).unwrap().count(), 2);
}

#[test]
fn verify_streams_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = speclab(&["verify", "--estimate", "3.4", "--instances", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["estimate_id"] == "3.4" && l["pass"] == true));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(speclab(&["verify", "--estimate", "9.9"], dir.path()).status.code(), Some(2));
    assert_eq!(speclab(&["sweep"], dir.path()).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "quantity = \"nope\"").unwrap();
    assert_eq!(
        speclab(&["sweep", "--config", bad.to_str().unwrap()], dir.path()).status.code(),
        Some(2)
    );
    // λ beyond the trusted range of a K=8 torus
    let far = dir.path().join("far.toml");
    std::fs::write(&far, SWEEP.replace("[1.0, 1.5, 2.0]", "[1.0, 5.0]")).unwrap();
    assert_eq!(
        speclab(&["sweep", "--config", far.to_str().unwrap()], dir.path()).status.code(),
        Some(2)
    );
}
