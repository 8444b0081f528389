//! End-to-end checks of the command line binary: exit codes, config
//! resolution, determinism, and a full simulate/fit/validate/soc pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn celldyn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_celldyn"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = celldyn(dir.path(), &["simulate", "--set", "simulate.typo=1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key"), "stderr: {err}");
}

#[test]
fn malformed_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "capacity_ah = 8\n").unwrap();
    let out = celldyn(dir.path(), &["simulate", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("section"), "stderr: {err}");
}

#[test]
fn missing_input_maps_to_io_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = celldyn(dir.path(), &["fit", "--set", "fit.trace=absent.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn soc_rejects_a_memoryless_parameter_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&celldyn(
        d,
        &[
            "simulate",
            "--seed",
            "3",
            "--out",
            "sim",
            "--set",
            "simulate.profile=constant",
            "--set",
            "simulate.duration_s=240",
            "--set",
            "simulate.rate_c=0.5",
            "--set",
            "simulate.truth=static",
            "--set",
            "simulate.sensor=ideal",
        ],
    ));
    assert_ok(&celldyn(
        d,
        &[
            "fit",
            "--out",
            "fit",
            "--set",
            "fit.family=rbf",
            "--set",
            "fit.rbf_kernels=5",
            "--set",
            "fit.trace=sim/trace.csv",
        ],
    ));
    let out = celldyn(
        d,
        &[
            "soc",
            "--out",
            "soc",
            "--set",
            "soc.params=fit/params.json",
            "--set",
            "soc.trace=sim/trace.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn same_seed_reproduces_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        assert_ok(&celldyn(d, &["simulate", "--seed", "42", "--out", out]));
    }
    assert_ok(&celldyn(
        d,
        &["simulate", "--seed", "43", "--out", "c"],
    ));
    let a = std::fs::read(d.join("a/trace.csv")).unwrap();
    let b = std::fs::read(d.join("b/trace.csv")).unwrap();
    let c = std::fs::read(d.join("c/trace.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn overrides_beat_the_config_file_and_land_in_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.cfg"),
        "[simulate]\nprofile = constant\nduration_s = 120\ntruth = static\nsensor = ideal\n",
    )
    .unwrap();
    assert_ok(&celldyn(d, &["simulate", "--config", "run.cfg", "--out", "file"]));
    assert_ok(&celldyn(
        d,
        &[
            "simulate",
            "--config",
            "run.cfg",
            "--out",
            "over",
            "--set",
            "simulate.duration_s=60",
        ],
    ));
    let file_rows = std::fs::read_to_string(d.join("file/trace.csv"))
        .unwrap()
        .lines()
        .count();
    let over_rows = std::fs::read_to_string(d.join("over/trace.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(file_rows, 121);
    assert_eq!(over_rows, 61);
    let echo = std::fs::read_to_string(d.join("over/config.resolved.cfg")).unwrap();
    assert!(echo.contains("duration_s = 60"), "echo:\n{echo}");
    assert!(echo.contains("profile = constant"), "echo:\n{echo}");
}

#[test]
fn pipeline_simulate_fit_validate_soc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&celldyn(
        d,
        &[
            "simulate",
            "--seed",
            "11",
            "--out",
            "sim",
            "--set",
            "simulate.soc_lo=0.75",
        ],
    ));
    assert_ok(&celldyn(
        d,
        &[
            "fit",
            "--out",
            "fit",
            "--set",
            "fit.trace=sim/trace.csv",
            "--set",
            "fit.family=filter_state",
        ],
    ));
    assert_ok(&celldyn(
        d,
        &[
            "validate",
            "--out",
            "val",
            "--set",
            "validate.params=fit/params.json",
            "--set",
            "validate.trace=sim/trace.csv",
        ],
    ));
    assert_ok(&celldyn(
        d,
        &[
            "soc",
            "--out",
            "soc",
            "--set",
            "soc.params=fit/params.json",
            "--set",
            "soc.trace=sim/trace.csv",
            "--set",
            "soc.truth_soc=sim/truth_soc.csv",
            "--set",
            "soc.soc0=0.95",
        ],
    ));

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("val/metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["family"], "filter_state");
    let rms_mv = metrics["rms_mv"].as_f64().unwrap();
    assert!(rms_mv < 20.0, "validation rms {rms_mv} mV");
    assert!(metrics["config_sha256"].as_str().unwrap().len() == 64);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("soc/soc_summary.json")).unwrap())
            .unwrap();
    let rms_soc = summary["rms_soc_error"].as_f64().unwrap();
    assert!(rms_soc < 0.05, "soc rms error {rms_soc}");
    let soc_rows = std::fs::read_to_string(d.join("soc/soc.csv")).unwrap();
    assert!(soc_rows.starts_with("time_s,soc,sigma,innovation_v\n"));
}
