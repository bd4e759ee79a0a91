use std::path::Path;
use std::process::{Command, Output};

const SBM: &str = "sbm:blocks=30/30,p_in=0.3,p_out=0.02,d=4,seed=3";

fn verify(out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unlearn-audit"))
        .args(["verify", "--dataset", SBM, "--out"])
        .arg(out)
        .args(["--epochs", "30", "--hidden", "16"])
        .args(extra)
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn verify_writes_report_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = verify(
        tmp.path(),
        &[
            "--backbone",
            "gcn",
            "--seeds",
            "1001,1002",
            "--forget-frac",
            "0.1",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(
        stdout.contains("RA_pre") && stdout.contains("GED∆"),
        "{stdout}"
    );
    for f in [
        "cells.jsonl",
        "report.json",
        "table.txt",
        "membership.txt",
        "timings.json",
    ] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let cells = std::fs::read_to_string(tmp.path().join("cells.jsonl")).unwrap();
    assert_eq!(cells.lines().count(), 6);
    assert!(tmp.path().join("gcn-retrain-1002/post/rules.txt").exists());
    assert!(!tmp.path().join("gcn-retrain-1002/params_pre.txt").exists());
}

#[test]
fn method_args_and_saved_params() {
    let tmp = tempfile::tempdir().unwrap();
    let out = verify(
        tmp.path(),
        &[
            "--backbone",
            "gat",
            "--method",
            "noop",
            "--seeds",
            "7",
            "--method-arg",
            "ascent_steps=0",
            "--save-params",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let cells = std::fs::read_to_string(tmp.path().join("cells.jsonl")).unwrap();
    assert!(cells.contains("\"ascent_steps\":\"0\""));
    assert!(cells.contains("\"hs\":0.0"));
    assert!(tmp.path().join("gat-noop-7/params_post.txt").exists());
}

#[test]
fn invalid_plans_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for extra in [
        &["--method", "foo"][..],
        &["--method", ""],
        &["--forget-frac", "1.5"],
        &["--k", "0"],
        &["--method", "retrain", "--method-arg", "radius=1"],
        &["--method-arg", "novalue"],
    ] {
        let out = verify(tmp.path(), extra);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{extra:?}: {}",
            text(&out.stderr)
        );
        assert!(text(&out.stderr).contains("error"), "{extra:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_unlearn-audit"))
        .args(["verify", "--dataset", "/nonexistent/dir", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("cells.jsonl").exists());
}

#[test]
fn unknown_method_lists_the_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let out = verify(tmp.path(), &["--method", "foo"]);
    let err = text(&out.stderr);
    assert!(err.contains("local-finetune, noop, retrain"), "{err}");
}

#[test]
fn partial_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = verify(
        tmp.path(),
        &[
            "--backbone",
            "gcn",
            "--seeds",
            "1",
            "--method",
            "noop,local-finetune",
            "--method-arg",
            "radius=x",
        ],
    );
    assert_eq!(out.status.code(), Some(1), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("failed: gcn/local-finetune/1"));
    let cells = std::fs::read_to_string(tmp.path().join("cells.jsonl")).unwrap();
    assert!(cells.contains("\"status\":\"failed\"") && cells.contains("\"status\":\"ok\""));
}
