use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn iel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iel")).args(args).output().unwrap()
}

fn scalar_config() -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join("scalar_linear.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p.display().to_string()
}

fn read_data(path: PathBuf) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["data"].clone()
}

#[test]
fn missing_dwell_is_rejected_with_its_pointer() {
    let cfg = configs().join("missing_dwell.json");
    let out = iel(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/grid/dwell"));
}

#[test]
fn bundled_configs_validate() {
    for name in ["scalar_linear", "scalar_sweep", "diag_linear_2d", "bistable_1d", "bilinear_2d"] {
        let cfg = configs().join(format!("{name}.json"));
        let out = iel(&["validate", "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid "));
    }
}

#[test]
fn simulate_reaches_e_at_unit_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("scalar_linear.json");
    let out = iel(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with('#'));
    let last = csv.lines().last().unwrap();
    let x: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((x - std::f64::consts::E).abs() < 1e-6, "x(1) = {x}");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn neutral_scalar_is_not_hyperbolic() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = scalar_config();
    v["system"]["params"] = json!([0.0]);
    let cfg = write_config(dir.path(), &v);
    let out = iel(&["spectrum", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn escaping_region_is_uncoverable() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = scalar_config();
    // ẋ = x + u ≥ 0.5 on [1.5, 1.9], so every trajectory leaves.
    v["entropy"] = json!({
        "taus": [{"tau": 1.0, "dwell": 0.25}],
        "k": {"rule": "box", "lo": [1.5], "hi": [1.9]},
        "q": {"rule": "box", "lo": [1.5], "hi": [1.9]},
        "resolution": 400
    });
    let cfg = write_config(dir.path(), &v);
    let out = iel(&["entropy", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn channel_reuses_matching_entropy_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = scalar_config();
    v["entropy"]["taus"] = json!([{"tau": 1.0, "dwell": 0.25}, {"tau": 2.0, "dwell": 0.25}, {"tau": 3.0, "dwell": 0.5}]);
    v["entropy"]["resolution"] = json!(1200);
    v["channel"] = json!({"horizon_periods": 10, "random_states": 50, "converse_horizon_periods": 5});
    let cfg = write_config(dir.path(), &v);
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();
    assert!(iel(&["entropy", "--config", &cfg, "--out", out]).status.success());
    let o = iel(&["channel", "--config", &cfg, "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = read_data(out_dir.join("channel.json"));
    assert_eq!(data["entropy_source"], "reused");
    assert!(data["best"]["m"].as_u64().unwrap() >= 1);

    // A different seed changes the hash, so the entropy run is redone.
    let o = iel(&["channel", "--config", &cfg, "--out", out, "--seed", "99"]);
    assert!(o.status.success());
    assert_eq!(read_data(out_dir.join("channel.json"))["entropy_source"], "computed");

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["files"].as_object().unwrap().contains_key("channel.json"));
}

#[test]
fn worker_count_does_not_change_the_hash() {
    let cfg = configs().join("scalar_linear.json");
    let a = iel(&["validate", "--config", cfg.to_str().unwrap(), "--workers", "1"]);
    let b = iel(&["validate", "--config", cfg.to_str().unwrap(), "--workers", "3", "--out", "elsewhere"]);
    let c = iel(&["validate", "--config", cfg.to_str().unwrap(), "--resolution", "401"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}
