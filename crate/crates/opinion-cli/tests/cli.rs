use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn opinion(dir: &Path, args: &[&str], config: &str) -> (i32, String) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_opinion"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn analysis(config: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = opinion(dir.path(), &["analyze"], config);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("out/analyze.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn names(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap().to_string()).collect()
}

#[test]
fn analyze_low_alpha() {
    let v = analysis(r#"{"spec": {"N": 12, "n": 3, "m": 5, "k": 2, "alpha": 2}}"#);
    assert_eq!(v["regime"], "LowAlpha");
    let stable = v["stable"].as_array().unwrap();
    assert_eq!(stable.len(), 9);
    assert!(stable.iter().all(|s| s["energy"] == "-336"));
    assert_eq!(names(&v["metastable"]), ["-1", "+1"]);
}

#[test]
fn analyze_high_alpha_asymmetric() {
    let v = analysis(r#"{"spec": {"N": 12, "n": 3, "m": 5, "k": 2, "alpha": 13}}"#);
    assert_eq!(names(&v["stable"]), ["-1"]);
    assert_eq!(names(&v["metastable"]), ["+1"]);
}

#[test]
fn analyze_critical_equal() {
    let v = analysis(r#"{"spec": {"N": 8, "n": 3, "m": 3, "k": 1, "alpha": 3}}"#);
    assert_eq!(v["regime"], "CriticalEqual");
    let stable = names(&v["stable"]);
    assert_eq!(stable.len(), 6);
    assert_eq!(&stable[..2], ["-1", "+1"]);
    assert!(stable[2..].iter().all(|s| s.starts_with("sigma_A")));
}

#[test]
fn analyze_names_the_violated_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = opinion(dir.path(), &["analyze"], r#"{"spec": {"N": 12, "n": 3, "m": 5, "k": 2, "alpha": 4}}"#);
    assert_eq!(code, 2);
    assert!(err.contains("excluded range"), "{err}");
    let v = analysis(r#"{"spec": {"N": 12, "n": 3, "m": 5, "k": 2, "alpha": 4, "strict": false}}"#);
    assert_eq!(v["regime"], "Unsupported");
    assert!(v["unsupported_reason"].as_str().unwrap().contains("excluded range"));
}

#[test]
fn bruteforce_guard_and_toy() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = opinion(dir.path(), &["bruteforce"], r#"{"spec": {"N": 8, "n": 3, "m": 3, "k": 1, "alpha": 2}}"#);
    assert_eq!(code, 3);
    let (code, err) =
        opinion(dir.path(), &["bruteforce"], r#"{"spec": {"N": 4, "n": 1, "m": 1, "k": 1, "alpha": "3/2", "strict": false}}"#);
    assert_eq!(code, 0, "{err}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/landscape.json")).unwrap()).unwrap();
    assert_eq!(report["state_count"], 65536);
    assert_eq!(report["gamma_m"], "3");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/bruteforce.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_needs_a_seed_and_is_reproducible() {
    let config = r#"{"spec": {"N": 8, "n": 3, "m": 3, "k": 1, "alpha": 2}, "betas": [0.7], "replicas": 20, "gates": true}"#;
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = opinion(dir.path(), &["simulate"], config);
    assert_eq!(code, 2);
    assert!(err.contains("seed"));
    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let (code, err) = opinion(dir.path(), &["simulate", "--seed", "9", "--workers", workers], config);
        assert_eq!(code, 0, "{err}");
        outputs.push(std::fs::read(dir.path().join("out/samples.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("replica,beta,steps,censored,gate_tag,saddle_max\n"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn simulate_reports_censoring() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"spec": {"N": 8, "n": 3, "m": 3, "k": 1, "alpha": 2}, "betas": [3.0], "replicas": 10, "step_cap": 1000}"#;
    let (code, _) = opinion(dir.path(), &["simulate", "--seed", "1"], config);
    assert_eq!(code, 5);
    assert!(dir.path().join("out/samples.csv").exists());
}

#[test]
fn paths_and_enumerate_write_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = opinion(dir.path(), &["paths"], r#"{"spec": {"N": 8, "n": 3, "m": 3, "k": 1, "alpha": 2}, "paths": ["wbarstar2"]}"#);
    assert_eq!(code, 0, "{err}");
    let summary = std::fs::read_to_string(dir.path().join("out/paths.csv")).unwrap();
    assert_eq!(summary.lines().nth(1).unwrap(), "wbarstar2,25,-118,-118,true");
    let (code, err) = opinion(dir.path(), &["enumerate"], r#"{"sides": [4], "max_area": 5}"#);
    assert_eq!(code, 0, "{err}");
    let table = std::fs::read_to_string(dir.path().join("out/polyominoes.csv")).unwrap();
    assert!(table.starts_with("side,area,winding,min_perimeter,minimizer_count,classes\n"));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = opinion(dir.path(), &["verify"], r#"{"criteria": ["A1", "A9"]}"#);
    assert_eq!(code, 0, "{err}");
    let (code, _) = opinion(dir.path(), &["verify"], r#"{"criteria": ["A2"]}"#);
    assert_eq!(code, 4);
    let (code, _) = opinion(dir.path(), &["verify"], r#"{"criteria": ["A0"]}"#);
    assert_eq!(code, 2);
}
