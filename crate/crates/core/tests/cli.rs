use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mghc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mghc")).args(args).output().unwrap()
}

fn run_with(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    let out = dir.join("out");
    let mut all = vec![args[0], "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    all.extend_from_slice(&args[1..]);
    mghc(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ONE: &str = r#"{"lamination": [{"word": "a1", "weight": 1.0}], "seed": 7}"#;

#[test]
fn tau_at_a_fuchsian_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), ONE, &["tau", "--point", "2,0,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("out/tau.json"));
    assert_eq!(v["command"], "tau");
    assert_eq!(v["seed"], 7);
    let p = &v["points"][0];
    assert!((p["tau"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(p["piece"], "vertex");
    assert!(v["config"].get("out").is_none());
}

#[test]
fn tree_reports_translation_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), ONE, &["tree", "--gamma", "b1", "--gamma", "a1", "--pair", "1,0,1,3.14159"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("out/tree.json"));
    let t = v["translations"].as_array().unwrap();
    assert_eq!(t[0]["gamma"], "b1");
    assert!((t[0]["length"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(t[1]["length"].as_f64().unwrap(), 0.0);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 1);
}

#[test]
fn crossing_lamination_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(
        dir.path(),
        r#"{"lamination": [{"word": "a1", "weight": 1.0}, {"word": "b1", "weight": 1.0}]}"#,
        &["build"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[lamination::crossing]"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_1_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"a_grid": {"a0": 1.0, "factor": 1.5, "count": 4}}"#, "error[config::invalid]", "a_grid.factor"),
        (r#"{"seed": "x"}"#, "error[config::parse]", "field `seed`"),
        (r#"{"sed": 3}"#, "error[config::parse]", "unknown field `sed`"),
        (r#"{"lamination": [{"word": "a9", "weight": 1.0}]}"#, "error[", "a9"),
    ];
    for (config, kind, needle) in cases {
        let o = run_with(dir.path(), config, &["build"]);
        let err = stderr(&o);
        assert_ne!(o.status.code(), Some(0), "{config}");
        assert!(err.starts_with(kind) && err.contains(needle), "{config}: {err}");
    }
    let missing = mghc(&["build", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error[config::io]"), "{}", stderr(&missing));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(mghc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mghc(&["tau", "--point", "1,2"]).status.code(), Some(1));
    assert_eq!(mghc(&["--help"]).status.code(), Some(0));
}

#[test]
fn empty_lamination_builds_the_fuchsian_spacetime() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), "{}", &["build"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("out/build.json").exists());
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(dir.path(), ONE, &["tree", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("out/tree.json"));
    assert_eq!(v["seed"], 11);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 20);
}
