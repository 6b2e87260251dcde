use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sncl_cli::output::verify_manifest;

fn sncl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sncl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.toml");
    let text = format!(
        "preset = \"smooth_nonlocal\"\nname = \"small\"\n\n[grid]\nn_cells = 512\n\n[time]\nn_steps = 32\nn_outputs = 4\n\n\
         [run]\nn_paths = 3\noutput_dir = \"{}\"\n{extra}",
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn lists_presets() {
    let out = sncl(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "zero_flux",
        "constant_drift",
        "linear_fgp2",
        "smooth_nonlocal",
        "discontinuous_flux",
        "burgers_shock_demo",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn printed_preset_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = sncl(&["presets", "linear_fgp2"]);
    assert!(out.status.success());
    let path = dir.path().join("p.toml");
    fs::write(&path, &out.stdout).unwrap();
    let v = sncl(&["validate", path.to_str().unwrap()]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn invalid_config_exits_2_with_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "[grid]\nn_cells = 0\n\n[regularization]\neps_f_cells = 1\n\n[run]\nn_paths = 0\n",
    )
    .unwrap();
    let out = sncl(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("n_cells"), "{err}");
    assert!(err.contains("n_paths"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[grid]\nncells = 64\n").unwrap();
    assert_eq!(sncl(&["validate", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unknown_preset_exits_2() {
    assert_eq!(sncl(&["solve", "no_such_thing"]).status.code(), Some(2));
    assert_eq!(sncl(&["presets", "no_such_thing"]).status.code(), Some(2));
}

#[test]
fn solve_writes_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = sncl(&["solve", &cfg, "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let run = dir.path().join("out");
    // Five output times, mean and exemplar, plus the diagnostics document.
    assert_eq!(verify_manifest(&run), Ok(11));
    let csv = fs::read_to_string(run.join("snapshots/mean_004.csv")).unwrap();
    assert!(csv.starts_with("x,u\n"));
    assert_eq!(csv.lines().count(), 514);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(doc["mass_drift"]["passed"], true);
    assert_eq!(doc["positivity"]["gating"], true);
    for (_, entry) in doc.as_object().unwrap() {
        assert!(!entry["value"].to_string().contains("null"));
    }
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(sncl(&["solve", &cfg, "-q", "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(sncl(&[
        "solve",
        &cfg,
        "-q",
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "99",
        "--paths",
        "2"
    ])
    .status
    .success());
    let read = |d: &Path| fs::read(d.join("snapshots/path0_004.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["run"]["master_seed"], 99);
    assert_eq!(manifest["config"]["run"]["n_paths"], 2);
}

#[test]
fn diagnose_adds_optional_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = sncl(&["diagnose", &cfg, "-q"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/diagnostics.json")).unwrap()).unwrap();
    assert!(doc["hypothesis_norms"]["value"]["flux_l1"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["weak_residual"]["value"]["times"].as_array().unwrap().len(), 5);
}

#[test]
fn ladder_writes_under_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "\n[[ladder]]\nkind = \"marching_gap\"\nn_steps = [16, 32]\nn_paths = 2\n",
    );
    let out = sncl(&["ladder", &cfg, "-q"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out/ladder");
    assert_eq!(verify_manifest(&run), Ok(1));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("ladders.json")).unwrap()).unwrap();
    let entry = &doc["ladder_01_marching_gap"];
    assert_eq!(entry["gating"], false);
    assert_eq!(entry["value"]["study"]["levels"].as_array().unwrap().len(), 2);
}
