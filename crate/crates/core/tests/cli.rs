//! End-to-end runs of the `winddaq` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_winddaq"))
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.conf")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn winddaq")
}

fn summary(out: &Output) -> BTreeMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(name, fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn fault_free_run_logs_every_tick() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = run(&["run", "--duration", "600", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&o);
    assert_eq!(s["records_logged"], "600");
    assert_eq!(s["completeness"], "1.000000");
    for f in ["log", "diagnostics/transitions.log", "diagnostics/telemetry.log", "config.txt", "faults.txt", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_same_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let faults = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/faults.txt");
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&[
            "run",
            "--config",
            desk_config().to_str().unwrap(),
            "--faults",
            faults.to_str().unwrap(),
            "--duration",
            "12000",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        trees.push(tree(&out));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);

    let mut curves = Vec::new();
    for name in ["pa", "pb"] {
        let pkg = dir.path().join(name);
        let o = run(&["analyze", "--in", dir.path().join("a").to_str().unwrap(), "--out", pkg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        curves.push(fs::read(pkg.join("derived/curve.csv")).unwrap());
    }
    assert_eq!(curves[0], curves[1]);
}

#[test]
fn invalid_config_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "rotor_radius_m = -1\nrotor_height_m = 2\nsample_rate_hz = 7\n").unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--duration", "10", "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rotor_radius_m") && err.contains("sample_rate_hz"), "{err}");
}

#[test]
fn existing_log_is_not_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert!(run(&["run", "--duration", "5", "--out", out.to_str().unwrap()]).status.success());
    let before = tree(&out.join("log"));
    let o = run(&["run", "--duration", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(tree(&out.join("log")), before);
}

#[test]
fn strict_analysis_rejects_low_completeness() {
    let dir = tempfile::tempdir().unwrap();
    let faults = dir.path().join("faults.txt");
    fs::write(&faults, "100 250 POWER_OUTAGE\n").unwrap();
    let out = dir.path().join("r");
    let o = run(&[
        "run",
        "--config",
        desk_config().to_str().unwrap(),
        "--faults",
        faults.to_str().unwrap(),
        "--duration",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let completeness: f64 = summary(&o)["completeness"].parse().unwrap();
    assert!(completeness < 0.9, "{completeness}");

    let pkg = dir.path().join("p");
    let lenient = run(&["analyze", "--in", out.to_str().unwrap(), "--out", pkg.to_str().unwrap()]);
    assert!(lenient.status.success());
    let strict = run(&[
        "analyze",
        "--in",
        out.to_str().unwrap(),
        "--out",
        dir.path().join("q").to_str().unwrap(),
        "--strict",
        "--min-completeness",
        "0.9",
    ]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn analysis_requires_descriptive_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert!(run(&["run", "--duration", "120", "--out", out.to_str().unwrap()]).status.success());
    let o = run(&["analyze", "--in", out.to_str().unwrap(), "--out", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("metadata key title required"));
}

#[test]
fn unreadable_input_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--in", dir.path().join("nope").to_str().unwrap(), "--out", dir.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn powercycle_profile_and_its_negative_control() {
    let ok = run(&["benchtest", "powercycle50", "--seed", "3"]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("50/50 clean"));

    let broken = run(&["benchtest", "powercycle50", "--seed", "3", "--no-commit-marker"]);
    assert_eq!(broken.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("powercycle50"));

    assert_eq!(run(&["benchtest", "soak"]).status.code(), Some(2));
}
