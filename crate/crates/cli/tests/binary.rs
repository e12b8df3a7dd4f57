use std::path::Path;
use std::process::Command;

fn nobind(args: &[&str], config: &str, dir: &Path) -> (i32, String) {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nobind"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .env("NOBIND_THREADS", "2")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(nobind(&["kernels"], r#"{"kernels": {"queries": [{"distance": 2, "lag": 1, "cutoff": 1}]}}"#, d).0, 0);
    assert_eq!(nobind(&["optimize"], r#"{"model": {"kind": "piezo", "lamda": 1}}"#, d).0, 2);
    assert_eq!(nobind(&["optimize"], "{", d).0, 2);
    assert_eq!(nobind(&["mc"], r#"{"model": {"kind": "optical"}, "mc": {"T": 100, "dt": 0.001, "count": 100000}}"#, d).0, 3);
    let missing = Command::new(env!("CARGO_BIN_EXE_nobind")).args(["verify", "--config", "/nonexistent.json"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));
    let bad_command = Command::new(env!("CARGO_BIN_EXE_nobind")).args(["solve", "--config", "x"]).status().unwrap();
    assert_eq!(bad_command.code(), Some(2));
}

#[test]
fn optical_optimize_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt.csv");
    let (code, stdout) = nobind(
        &["optimize", "--format", "csv", "--out", out.to_str().unwrap(), "--seed", "11"],
        r#"{"model": {"kind": "optical"}, "optimizer": {"n_check": 1000}}"#,
        dir.path(),
    );
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    let row = reader.records().next().unwrap().unwrap();
    let field = |name: &str| row.get(header.iter().position(|h| h == name).unwrap()).unwrap().to_string();
    assert!(field("value").parse::<f64>().unwrap() < 25.9);
    assert!(field("converted_value").parse::<f64>().unwrap() < 36.7);
    assert_eq!(field("seed"), "11");
}

#[test]
fn mc_with_zero_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = nobind(&["mc"], r#"{"model": {"kind": "optical"}, "mc": {"alpha": 0, "count": 32, "T": 1, "dt": 0.1}}"#, dir.path());
    assert_eq!(code, 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(doc["result"]["action_mean"], 0.0);
    assert_eq!(doc["passed"], true);
}
