//! End-to-end tests of the compiled binary: flag shapes, exit codes, and
//! stdout/stderr contracts for every subcommand.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use suffaudit::data::write_csv;
use suffaudit::scm::{build_scenario, simulate};

fn suffaudit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suffaudit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stage_beneficial(dir: &Path, n: usize) {
    let model = build_scenario("fig1c", &BTreeMap::new()).unwrap();
    let data = simulate(&model, n, 1).unwrap();
    write_csv(&data, dir.join("rows.csv")).unwrap();
    std::fs::write(
        dir.join("beneficial.graph"),
        "WoM_pre -> IMF -> WoM_post; IMF -> WoI_post",
    )
    .unwrap();
    let config = serde_json::json!({
        "spec_version": "1",
        "data": "rows.csv",
        "schema": {
            "IMF": "binary",
            "WoM_pre": "binary",
            "WoM_post": "binary",
            "WoI_post": "binary"
        },
        "roles": {
            "treatment": "IMF",
            "macro_pre": "WoM_pre",
            "macro_post": "WoM_post",
            "wellbeing_pre": "WoM_pre",
            "wellbeing_post": "WoI_post",
            "covariates": ["WoM_pre"]
        },
        "graphs": ["beneficial.graph"],
        "output": "report.json"
    });
    std::fs::write(dir.join("audit.json"), config.to_string()).unwrap();
}

#[test]
fn audit_exits_zero_on_fair_data_and_prints_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    stage_beneficial(dir.path(), 20_000);
    let out = suffaudit(dir.path(), &["audit", "--config", "audit.json"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("ensemble verdicts:"), "{text}");
    assert!(text.contains("selection"), "{text}");
    assert!(text.contains("report written to"), "{text}");
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn audit_exits_two_when_any_criterion_is_unfair() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_scenario("adverse_subgroup", &BTreeMap::new()).unwrap();
    let data = simulate(&model, 50_000, 2).unwrap();
    write_csv(&data, dir.path().join("rows.csv")).unwrap();
    std::fs::write(
        dir.path().join("subgroup.graph"),
        "G -> WoI_post; IMF -> WoI_post",
    )
    .unwrap();
    let config = serde_json::json!({
        "spec_version": "1",
        "data": "rows.csv",
        "schema": {"IMF": "binary", "G": "binary", "WoI_post": "binary"},
        "roles": {
            "treatment": "IMF",
            "macro_pre": "G",
            "macro_post": "G",
            "wellbeing_pre": "G",
            "wellbeing_post": "WoI_post",
            "covariates": ["G"]
        },
        "graphs": ["subgroup.graph"],
        "criteria": ["lax", "stringent"],
        "output": "report.json"
    });
    std::fs::write(dir.path().join("audit.json"), config.to_string()).unwrap();
    let out = suffaudit(dir.path(), &["audit", "--config", "audit.json"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("unfair"));
}

#[test]
fn audit_exits_one_on_a_missing_config_or_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = suffaudit(dir.path(), &["audit", "--config", "nope.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error:"));

    stage_beneficial(dir.path(), 100);
    std::fs::remove_file(dir.path().join("rows.csv")).unwrap();
    let out = suffaudit(dir.path(), &["audit", "--config", "audit.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("rows.csv"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one_not_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = suffaudit(dir.path(), &["audit"]);
    assert_eq!(out.status.code(), Some(1));
    let out = suffaudit(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    let out = suffaudit(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("audit"));
}

#[test]
fn simulate_supports_interventions_and_reseeding() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("model.scm"),
        "node WoM_pre: logistic(0)\nnode IMF: logistic(-0.6; WoM_pre=1.1)\n",
    )
    .unwrap();
    let out = suffaudit(
        dir.path(),
        &[
            "simulate", "--model", "model.scm", "--n", "400", "--seed", "9", "--out", "a.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("400 rows"));

    let out = suffaudit(
        dir.path(),
        &[
            "simulate", "--model", "model.scm", "--n", "400", "--seed", "9", "--out", "b.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the same rows");

    let out = suffaudit(
        dir.path(),
        &[
            "simulate", "--model", "model.scm", "--n", "400", "--seed", "9", "--out", "c.csv",
            "--do", "WoM_pre=1",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("do(WoM_pre=1)"));
    let c = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut lines = c.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "WoM_pre").unwrap();
    assert!(
        lines.all(|l| l.split(',').nth(col) == Some("1")),
        "do(WoM_pre=1) must pin the column to 1"
    );

    let out = suffaudit(
        dir.path(),
        &[
            "simulate", "--model", "model.scm", "--n", "10", "--seed", "1", "--out", "d.csv",
            "--do", "WoM_pre=7",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("NODE=0 or NODE=1"));
}

#[test]
fn dsep_prints_the_answer_for_both_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.graph"), "A -> B -> C; D -> C").unwrap();
    let out = suffaudit(
        dir.path(),
        &["dsep", "--graph", "g.graph", "--x", "A", "--y", "C", "--z", "B"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("d-separated"));

    let out = suffaudit(
        dir.path(),
        &["dsep", "--graph", "g.graph", "--x", "A", "--y", "D"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("d-separated"));

    // Conditioning on the collider C opens A — D.
    let out = suffaudit(
        dir.path(),
        &["dsep", "--graph", "g.graph", "--x", "A", "--y", "D", "--z", "C"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("d-connected"));
}

#[test]
fn ethics_scores_allocations_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("alloc.json"),
        r#"{"north": [30, 30, 40], "south": [25, 25]}"#,
    )
    .unwrap();
    let out = suffaudit(
        dir.path(),
        &[
            "ethics", "--alloc", "alloc.json", "--theory", "sufficientarian", "--threshold",
            "30",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(doc["score"], serde_json::json!(3.0));
    assert_eq!(doc["threshold"], serde_json::json!(30.0));

    let out = suffaudit(
        dir.path(),
        &["ethics", "--alloc", "alloc.json", "--theory", "nonsense"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown theory"));
}
