//! End-to-end tests of the binary: the documented command examples, the
//! exit-code contract, format round trips, and fixture-directory override.

use std::path::Path;
use std::process::{Command, Output};

use newcomblike::fileio;
use newcomblike::fixtures;

fn run_in(dir: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_newcomblike"));
    cmd.args(args);
    match dir {
        Some(d) => cmd.env("ANTHROPIC_CDT_FIXTURES", d),
        None => cmd.env_remove("ANTHROPIC_CDT_FIXTURES"),
    };
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_in(None, args)
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

#[test]
fn solve_lists_three_stationary_policies() {
    let output = run(&["solve", "sbpd_v1"]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("3 stationary"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("stationary ")).count(), 3);
    assert!(text.contains("0.3585"), "{text}");
    assert!(text.contains("0.8832"), "{text}");
}

#[test]
fn beliefs_example_reports_sixths() {
    let output = run(&[
        "beliefs",
        "sbpd_v2",
        "--kind",
        "ggt",
        "--rho",
        "0.8,2",
        "--policy",
        "1,0",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("0.166666666667"), "{text}");
    assert!(text.contains("0.833333333333"), "{text}");
}

#[test]
fn ratify_wine_refuses_with_derivative_message() {
    let output = run(&["ratify", "wine", "--kind", "ggt", "--policy", "0,1"]);
    assert_eq!(output.status.code(), Some(1), "{}", stderr(&output));
    assert!(stderr(&output).contains("derivative unavailable"), "{}", stderr(&output));
}

#[test]
fn unknown_problem_is_an_input_error() {
    let output = run(&["analyze", "no_such_problem"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("unknown problem"), "{}", stderr(&output));
}

#[test]
fn malformed_flags_are_input_errors() {
    let wrong_arity = run(&["beliefs", "sbpd_v1", "--policy", "0.5"]);
    assert_eq!(wrong_arity.status.code(), Some(2));

    let negative = run(&["beliefs", "sbpd_v1", "--policy", "-1,2"]);
    assert_eq!(negative.status.code(), Some(2));

    let small_grid = run(&["solve", "sbpd_v1", "--grid", "5"]);
    assert_eq!(small_grid.status.code(), Some(2));
    assert!(stderr(&small_grid).contains("grid"), "{}", stderr(&small_grid));

    let bad_tol = run(&["ratify", "sbpd_v1", "--policy", "1,0", "--tol", "0"]);
    assert_eq!(bad_tol.status.code(), Some(2));

    let stray_rho = run(&["beliefs", "sbpd_v1", "--kind", "gt", "--policy", "1,0", "--rho", "1,1"]);
    assert_eq!(stray_rho.status.code(), Some(2));
}

#[test]
fn command_line_policies_renormalize() {
    let scaled = run(&["analyze", "sbpd_v1", "--policy", "3,1"]);
    let plain = run(&["analyze", "sbpd_v1", "--policy", "0.75,0.25"]);
    assert!(scaled.status.success());
    assert_eq!(stdout(&scaled), stdout(&plain));
}

#[test]
fn structured_reports_round_trip() {
    for args in [
        vec!["analyze", "sbpd_v1", "--policy", "0.5,0.5", "--format", "structured"],
        vec!["solve", "sbpd_v2", "--format", "structured"],
        vec![
            "beliefs", "sbpd_v2", "--kind", "ggt", "--rho", "0.8,2", "--policy", "1,0",
            "--format", "structured",
        ],
        vec!["simulate", "newcomb", "--policy", "1,0", "--rollouts", "1000", "--format", "structured"],
    ] {
        let output = run(&args);
        assert!(output.status.success(), "{args:?}: {}", stderr(&output));
        let text = stdout(&output);
        let value: serde_json::Value = serde_json::from_str(&text).expect("valid json");
        let mut reprinted = serde_json::to_string_pretty(&value).unwrap();
        reprinted.push('\n');
        assert_eq!(text, reprinted, "round trip drifted for {args:?}");
    }
}

#[test]
fn csv_sweep_has_pinned_columns() {
    let output = run(&["analyze", "sbpd_v1", "--format", "csv", "--grid", "10"]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,exante_eu,grad_C,cdt_adv_C");
    assert_eq!(lines.len(), 12);
    for row in &lines[1..] {
        assert_eq!(row.split(',').count(), 4, "{row}");
    }
    assert!(lines[1].starts_with("0,"));
    assert!(lines[11].starts_with("1,"));
}

#[test]
fn csv_sweep_needs_two_actions() {
    let output = run(&["analyze", "adversarial_offer", "--format", "csv"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("two-action"), "{}", stderr(&output));
}

#[test]
fn approx_emits_decreasing_errors() {
    let output = run(&[
        "approx",
        "sbpd_v2",
        "--n-list",
        "2,4",
        "--grid",
        "50",
        "--restarts",
        "4",
        "--format",
        "csv",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,sup_error,distance_to_reference");
    assert_eq!(lines.len(), 3);
    let sup = |row: &str| row.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!(sup(lines[1]) > sup(lines[2]), "{text}");
}

#[test]
fn simulate_is_deterministic_under_seed() {
    let args = ["simulate", "newcomb75", "--policy", "0.4,0.6", "--rollouts", "20000", "--seed", "7"];
    let first = run(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("verdict: pass"));
    let second = run(&args);
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn compile_sim_checks_the_expansion() {
    let good = run(&["compile-sim", "sbpd_v1"]);
    assert!(good.status.success(), "{}", stderr(&good));
    assert!(stdout(&good).contains("pass"), "{}", stdout(&good));

    let refused = run(&["compile-sim", "k3_nonsampleable"]);
    assert_eq!(refused.status.code(), Some(1), "{}", stderr(&refused));
}

#[test]
fn ratify_reports_verdicts_for_every_kind() {
    for kind in ["gt", "gsgt", "lsgt", "ggt"] {
        let output = run(&["ratify", "sbpd_v1", "--kind", kind, "--policy", "0,1"]);
        assert!(output.status.success(), "{kind}: {}", stderr(&output));
        assert!(stdout(&output).contains("ratifiable: true"), "{kind}: {}", stdout(&output));
    }
}

#[test]
fn validate_passes_every_builtin_fixture() {
    for name in fixtures::names() {
        let output = run(&["validate", name]);
        assert!(output.status.success(), "{name}: {}", stderr(&output));
        assert!(stdout(&output).contains("terminates"), "{name}");
        assert!(stdout(&output).contains("no structural violations"), "{name}");
    }
}

#[test]
fn out_flag_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let output = run(&[
        "analyze",
        "sbpd_v1",
        "--format",
        "structured",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stdout(&output).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    serde_json::from_str::<serde_json::Value>(&text).expect("valid json");
}

#[test]
fn fixture_directory_override_shadows_builtin_names() {
    let dir = tempfile::tempdir().unwrap();
    // A stand-in problem published under a built-in fixture's name.
    let substitute = fixtures::load("staircase_4").unwrap().problem;
    fileio::save_path(&substitute, &dir.path().join("sbpd_v1.json")).unwrap();

    let shadowed = run_in(Some(dir.path()), &["validate", "sbpd_v1"]);
    assert!(shadowed.status.success(), "{}", stderr(&shadowed));
    let text = stdout(&shadowed);
    assert!(text.contains("sbpd_v1.json"), "{text}");
    assert!(!text.contains("fixture:sbpd_v1"), "{text}");

    // A name absent from the directory still resolves to the registry.
    let fallback = run_in(Some(dir.path()), &["validate", "sbpd_v2"]);
    assert!(fallback.status.success(), "{}", stderr(&fallback));
    assert!(stdout(&fallback).contains("fixture:sbpd_v2"));
}

#[test]
fn verify_paper_reports_ten_passes() {
    let output = run(&["verify-paper"]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 10, "{text}");
    assert!(text.contains("10 of 10 criteria pass"), "{text}");
}
