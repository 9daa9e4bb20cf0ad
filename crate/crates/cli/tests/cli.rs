//! End-to-end tests of the command-line interface through the built binary:
//! exit codes, output formats, and the documented worked examples.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_budgetmech")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_five_identical_agents() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "five.json",
        r#"{"budget":"10","agents":[{"v":"4","c":"2"},{"v":"4","c":"2"},{"v":"4","c":"2"},{"v":"4","c":"2"},{"v":"4","c":"2"}]}"#,
    );
    let out = run_cli(&["run", &path, "--mech", "da"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["branch"]["kind"], "greedy");
    let x0 = json["agents"][0]["x_approx"].as_f64().unwrap();
    let x1 = json["agents"][1]["x_approx"].as_f64().unwrap();
    assert!((x0 - 1.0).abs() < 1e-12);
    assert!((x1 - 0.9098).abs() < 1e-4);
    let total = json["total_payment"].as_f64().unwrap();
    assert!(total <= 10.0 + 1e-6, "total {total}");
}

#[test]
fn theta_override_infeasible_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "theta.json",
        r#"{"budget":"10","theta":"3/2","agents":[{"v":"4","c":"2"},{"v":"4","c":"3"}]}"#,
    );
    let out = run_cli(&["run", &path, "--mech", "da-theta", "--theta", "3/2", "--alpha", "0.6"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_lower_bound_instance_selects_one_agent() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "lb.json",
        r#"{"budget":"1","agents":[{"v":"1","c":"1"},{"v":"1","c":"1"}]}"#,
    );
    let out = run_cli(&["run", &path]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // the tie breaks to agent 0, fully selected
    assert_eq!(json["branch"]["kind"], "star");
    assert_eq!(json["branch"]["winner"], 0);
    assert_eq!(json["agents"][0]["x"], "1");
    assert_eq!(json["agents"][1]["x"], "0");
}

#[test]
fn curve_of_single_agent_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one.json", r#"{"budget":"10","agents":[{"v":"5","c":"4"}]}"#);
    let out = run_cli(&["curve", &path, "--agent", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u_lo,u_hi,form,a,b,d"));
    assert_eq!(lines.next(), Some("0,10,const,1,0,0"));
    assert_eq!(lines.next(), None);
}

#[test]
fn curve_of_losing_agent_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "lose.json",
        r#"{"budget":"10","agents":[{"v":"4","c":"2"},{"v":"0","c":"1"}]}"#,
    );
    let out = run_cli(&["curve", &path, "--agent", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "only the header: {text}");
}

#[test]
fn audit_exits_zero_on_clean_instance_and_two_on_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "ok.json",
        r#"{"budget":"10","agents":[{"v":"6","c":"2"},{"v":"4","c":"4"},{"v":"5","c":"10"}]}"#,
    );
    let out = run_cli(&["audit", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check_name,status,worst_witness,slack"));
    assert!(text.contains("truthfulness,pass"));
    assert!(text.contains("budget_feasibility,pass"));

    let out = run_cli(&["audit", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_reports_violations_with_exit_one() {
    // alpha = 1 with an oversized beta drives every threat below the true
    // costs: the whole greedy selection is deselected, the value collapses,
    // and the approximation check must fail with exit 1.
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "greedy.json",
        r#"{"budget":"10","agents":[{"v":"4","c":"2"},{"v":"4","c":"2"},{"v":"4","c":"2"},{"v":"4","c":"2"},{"v":"4","c":"2"}]}"#,
    );
    let out = run_cli(&["audit", &path, "--alpha", "1", "--beta", "10"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("approximation,fail"), "{text}");
}

#[test]
fn bounds_at_two_are_exact() {
    let out = run_cli(&["bounds", "--from", "2", "--to", "2", "--step", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,divisible_lower_bound,indivisible_lower_bound"));
    assert_eq!(lines.next(), Some("2,19/16,5/2"));
}

#[test]
fn bounds_converge_to_five_fourths() {
    let out = run_cli(&["bounds", "--from", "1000", "--to", "1000", "--step", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let divisible = row.split(',').nth(1).unwrap();
    let value: Vec<i64> = divisible.split('/').map(|p| p.parse().unwrap()).collect();
    let as_f64 = value[0] as f64 / value[1] as f64;
    assert!((as_f64 - 1.25).abs() < 1e-4);
}

#[test]
fn gen_is_deterministic_and_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run_cli(&[
            "gen",
            "--seed",
            "7",
            "--n",
            "5",
            "--profile",
            "theta",
            "--theta",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a_text = std::fs::read_to_string(&a).unwrap();
    let b_text = std::fs::read_to_string(&b).unwrap();
    assert_eq!(a_text, b_text);
    // generated instances run end to end
    let out = run_cli(&["run", a.to_str().unwrap(), "--mech", "da-theta"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_instance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.json",
        r#"{"budget":"10","theta":"2","agents":[{"v":"1","c":"1"},{"v":"1","c":"8"}]}"#,
    );
    let out = run_cli(&["run", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("theta-competitiveness violated"), "{err}");
}
