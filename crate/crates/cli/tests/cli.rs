use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .env("CASCADE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_with_override_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = scenario("solve_rga.toml");
    let o = cascade(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "rga.phi=0.05pi",
        "--set",
        "rga.g=0.3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["kind"], "solve");
    assert!((summary["result"]["strength"].as_f64().unwrap() - 0.3).abs() < 1e-15);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["overrides"][0], "rga.phi=0.05pi");
    assert_eq!(manifest["threads"], 1);
    assert!(manifest["version"].as_str().unwrap().contains('+'));
    assert_eq!(manifest["resolved_config"]["emitters"][0]["g"], 0.3);
    let files: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["file"].as_str().unwrap())
        .collect();
    assert!(files.contains(&"amplitudes.json") && files.contains(&"resolved.toml"));
    assert!(out.join("resolved.toml").exists());
}

#[test]
fn manifest_replay_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    let cfg = scenario("bands.toml");
    let o = cascade(&["bands", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = first.join("manifest.json");
    let o = cascade(&["bands", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["band_single.csv", "band_doublon.csv", "band_triplon.csv"] {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn syntax_error_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "scenario = \"x\"\nkind = \"solve\"\n[lattice\nn_sites = 10\n").unwrap();
    let o = cascade(&["solve", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("ConfigError") && err.contains("line 3"), "{err}");
}

#[test]
fn unknown_key_is_fatal() {
    let cfg = scenario("solve_rga.toml");
    let o = cascade(&["solve", "--config", cfg.to_str().unwrap(), "--set", "lattice.colour=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn physics_error_names_itself_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("solve_rga.toml");
    let o = cascade(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "rga.detuning=-20.0",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with("OffResonant"), "{err}");
}

#[test]
fn missing_config_file_is_an_input_error() {
    let o = cascade(&["bands", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_prints_one_line_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = cascade(&["validate", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines.len() >= 10, "{stdout}");
    assert!(lines.iter().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    assert!(stdout.contains("doublon energy vs ED"));
    let all_pass = lines.iter().all(|l| l.starts_with("PASS "));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 1 }));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), lines.len());
}
