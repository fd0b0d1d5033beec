//! Black-box runs of the `gauge-arb` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], scenario: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_gauge-arb"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn report(out: &Path, command: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join(format!("{command}.json"))).unwrap()).unwrap()
}

#[test]
fn spectrum_on_arbitrage_fixture() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["spectrum", "--grid", "9"], &data("arb2.json"), dir.path()), 0);
    let r = report(dir.path(), "spectrum");
    assert_eq!(r["command"], "spectrum");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["verdict"], "ARBITRAGE");
    assert!(dir.path().join("spectrum.meta.json").exists());
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let s = data("flat.json");
    assert_eq!(run(&["curvature"], &s, dir.path()), 0);
    assert_eq!(run(&["curvature"], &s, dir.path()), 2);
    assert_eq!(run(&["curvature", "--force"], &s, dir.path()), 0);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["zc-test"], &data("missing.json"), dir.path()), 2);
    assert_eq!(run(&["spectrum", "--tol", "-1"], &data("flat.json"), dir.path()), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"assets": [], "surprise": 1}"#).unwrap();
    assert_eq!(run(&["zc-test"], &bad, &dir.path().join("o")), 2);
}

#[test]
fn double_runs_are_byte_identical() {
    for (cmd, scenario) in [
        (vec!["simulate"], "gbm.json"),
        (vec!["report", "--grid", "9"], "free1.json"),
        (vec!["utility", "--u", "power", "--gamma", "3"], "arb2.json"),
        (vec!["zc-test", "--seed", "3"], "gbm.json"),
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(run(&cmd, &data(scenario), a.path()), 0, "{cmd:?}");
        assert_eq!(run(&cmd, &data(scenario), b.path()), 0, "{cmd:?}");
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for n in names.iter().filter(|n| !n.to_string_lossy().ends_with("meta.json")) {
            assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
        }
    }
}

#[test]
fn seed_changes_the_hash() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(&["simulate"], &data("gbm.json"), a.path()), 0);
    assert_eq!(run(&["simulate", "--seed", "8"], &data("gbm.json"), b.path()), 0);
    assert_ne!(report(a.path(), "simulate")["config_hash"], report(b.path(), "simulate")["config_hash"]);
}
