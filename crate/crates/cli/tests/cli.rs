use std::borrow::BorrowMut;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn henn(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_henn"));
    for (k, _) in std::env::vars() {
        if k.starts_with("HENN_") {
            c.env_remove(k);
        }
    }
    c.env("RUST_LOG", "warn").arg(args[0]).arg("--data-dir").arg(data_dir()).args(&args[1..]);
    c
}

fn run(mut c: impl BorrowMut<Command>) -> Output {
    c.borrow_mut().output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn plain_iris_writes_every_output() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "run");
    let o = run(henn(&["train", "--dataset", "iris", "--out", &out]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("run");
    for f in ["report.json", "checkpoint.json", "series.csv", "timing.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let series = fs::read_to_string(dir.join("series.csv")).unwrap();
    assert!(series.starts_with("iter,loss,acc"));
    assert_eq!(series.lines().count(), 4);
    let report = json(&dir.join("report.json"));
    assert_eq!(report["iterations_completed"], 2);
    assert_eq!(report["settings"]["train"]["hidden"], 120);
    assert_eq!(report["data"]["train_rows"], 150);
}

#[test]
fn same_flags_give_identical_reports() {
    let tmp = TempDir::new().unwrap();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = out_arg(&tmp, name);
        let o = run(henn(&["train", "--backend", "exact", "--hidden", "8", "--seed", "7", "--out", &out]));
        assert_eq!(code(&o), 0);
        reports.push(fs::read(tmp.path().join(name).join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn leveled_iris_runs_two_iterations_then_exits_3() {
    let tmp = TempDir::new().unwrap();
    let two = out_arg(&tmp, "two");
    let o = run(henn(&["train", "--loss", "sle2", "--lr", "0.01", "--iters", "2", "--backend", "leveled", "--out", &two]));
    assert_eq!(code(&o), 0);
    assert_eq!(json(&tmp.path().join("two/report.json"))["iterations_completed"], 2);

    let three = out_arg(&tmp, "three");
    let o = run(henn(&["train", "--iters", "3", "--backend", "leveled", "--out", &three]));
    assert_eq!(code(&o), 3);
    let report = json(&tmp.path().join("three/report.json"));
    assert_eq!(report["iterations_completed"], 2);
    assert_eq!(report["halt"]["iteration"], 3);
    assert!(report["halt"]["reason"].as_str().unwrap().contains("depth exhausted"));
    assert_eq!(report["depth_per_iteration"], serde_json::json!([13, 13]));
    let ck = json(&tmp.path().join("three/checkpoint.json"));
    assert_eq!(ck["iterations_completed"], 2);
}

#[test]
fn boston_regression_reports_rmse_and_evaluates() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "boston");
    let o = run(henn(&[
        "train", "--dataset", "boston", "--loss", "mse", "--backend", "plain", "--grad-scale", "mean",
        "--lr", "0.05", "--iters", "300", "--out", &out,
    ]));
    assert_eq!(code(&o), 0);
    let report = json(&tmp.path().join("boston/report.json"));
    let last = report["records"].as_array().unwrap().last().unwrap().clone();
    let rmse = last["test_rmse"].as_f64().unwrap();
    assert!(rmse.is_finite() && rmse < 8.0, "test rmse {rmse}");
    assert!(last["train_accuracy"].is_null());
    assert_eq!(report["data"]["test_rows"], 101);

    let ck = tmp.path().join("boston/checkpoint.json");
    let o = run(henn(&["evaluate", "--checkpoint", ck.to_str().unwrap()]));
    assert_eq!(code(&o), 0);
    let eval: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(eval["split"], "test");
    assert_eq!(eval["evaluation"]["rmse"].as_f64().unwrap(), rmse);
}

#[test]
fn evaluate_without_held_out_rows_uses_training_rows() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "iris");
    assert_eq!(code(&run(henn(&["train", "--hidden", "4", "--out", &out]))), 0);
    let ck = tmp.path().join("iris/checkpoint.json");
    let o = run(henn(&["evaluate", "--checkpoint", ck.to_str().unwrap()]));
    let eval: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(eval["split"], "train");
    let report = json(&tmp.path().join("iris/report.json"));
    let last = report["records"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(eval["evaluation"]["accuracy"], last["train_accuracy"]);
    assert_eq!(eval["evaluation"]["loss"], last["loss"]);
    let o = run(henn(&["evaluate", "--checkpoint", ck.to_str().unwrap(), "--split", "test"]));
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_passes_and_fails_on_mismatched_seeds() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "same");
    let o = run(henn(&["compare", "--dataset", "iris", "--hidden", "8", "--out", &out]));
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS"));
    let report = json(&tmp.path().join("same/compare.json"));
    assert!(report["max_weight_divergence"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["iterations"].as_array().unwrap().len(), 3);

    let out = out_arg(&tmp, "mismatch");
    let o = run(henn(&["compare", "--hidden", "8", "--exact-seed", "1", "--out", &out]));
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL"));
    assert_eq!(json(&tmp.path().join("mismatch/compare.json"))["verdict"], "FAIL");
}

fn fit(args: &[&str]) -> Value {
    let mut c = Command::new(env!("CARGO_BIN_EXE_henn"));
    let o = c.arg("fit-sigmoid").args(args).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn fit_sigmoid_outputs() {
    let lin = fit(&["--degree", "1", "--range", "-4", "4"]);
    assert!((lin["coefficients"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let three = fit(&["--degree", "3", "--range", "-8", "8"]);
    let e3 = three["max_abs_error"].as_f64().unwrap();
    assert!((e3 - 0.113_188_528_187_606).abs() < 1e-9, "{e3}");
    let seven = fit(&["--degree", "7", "--range", "-8", "8"]);
    assert!(seven["max_abs_error"].as_f64().unwrap() <= e3);
    let o = Command::new(env!("CARGO_BIN_EXE_henn"))
        .args(["fit-sigmoid", "--degree", "40"])
        .output()
        .unwrap();
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ill-conditioned"));
}

fn hidden_used(extra_env: Option<&str>, flag: Option<&str>) -> u64 {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"hidden": 4, "iters": 1, "logQ": 990}"#).unwrap();
    let out = out_arg(&tmp, "o");
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--out", &out];
    if let Some(h) = flag {
        args.extend(["--hidden", h]);
    }
    let mut c = henn(&args);
    if let Some(h) = extra_env {
        c.env("HENN_HIDDEN", h);
    }
    assert_eq!(code(&run(c)), 0);
    let report = json(&tmp.path().join("o/report.json"));
    assert_eq!(report["settings"]["train"]["iters"], 1);
    report["settings"]["train"]["hidden"].as_u64().unwrap()
}

#[test]
fn flags_beat_environment_beat_config_file() {
    assert_eq!(hidden_used(None, None), 4);
    assert_eq!(hidden_used(Some("6"), None), 6);
    assert_eq!(hidden_used(Some("6"), Some("8")), 8);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"hiden": 4}"#).unwrap();
    let out = out_arg(&tmp, "o");
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--config", bad.to_str().unwrap(), "--out", &out],
        vec!["train", "--loss", "bogus", "--out", &out],
        vec!["train", "--dataset", "mnist", "--backend", "leveled", "--out", &out],
        vec!["train", "--dataset", "boston", "--loss", "sle2", "--out", &out],
        vec!["train", "--backend", "exact", "--hidden", "300", "--out", &out],
        vec!["train", "--backend", "exact", "--batch-size", "8", "--out", &out],
        vec!["train", "--slots", "1000", "--backend", "exact", "--out", &out],
    ];
    for args in cases {
        let o = run(henn(&args));
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(henn(&["train", "--out", &out]).env("HENN_LR", "abc"));
    assert_eq!(code(&o), 2);
}

#[test]
fn sle_experiment_smoke() {
    if !data_dir().join("mnist/train-images-idx3-ubyte").exists() {
        eprintln!("MNIST files not found; run scripts/fetch-mnist.sh");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp, "sle");
    let o = run(henn(&[
        "sle-experiment", "--subset", "500", "--hidden", "32", "--repeats", "1", "--epochs", "3",
        "--lrs", "0.12,0.01", "--losses", "sle1s,sle2", "--out", &out,
    ]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("sle");
    for lr in ["0.12", "0.01"] {
        for loss in ["sle1s", "sle2"] {
            let csv = fs::read_to_string(dir.join(format!("lr_{lr}/{loss}.csv"))).unwrap();
            assert_eq!(csv.lines().count(), 5);
        }
    }
    let report = json(&dir.join("report.json"));
    assert_eq!(report["curves"].as_array().unwrap().len(), 4);
    assert_eq!(report["config"]["repeats"], 1);
}
