mod common;

use std::io::Write;
use std::process::{Command, Output, Stdio};

use common::*;

fn dynet(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dynet"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn validate_accepts_the_example_and_reports_issues() {
    let o = dynet(&["validate", &fx("fig1.net")], "");
    assert_eq!(code(&o), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(
        &bad,
        r#"{"nodes": [1, 2], "edges": [[1, 2], [2, 3]],
            "params": [{"name": "bw", "rules": [{"when": [{"field": "src", "op": "=", "value": 1}], "domain": [[1, 2]]}]}]}"#,
    )
    .unwrap();
    let o = dynet(&["validate", bad.to_str().unwrap()], "");
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("node 3"), "{text}");
    assert!(text.contains("not total"), "{text}");

    // Invalid networks are input errors for every other command.
    let o = dynet(&["compile", bad.to_str().unwrap()], "");
    assert_eq!(code(&o), 2);
}

#[test]
fn unparsable_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, "{\"nodes\": [1,\n 2], \"colour\": 1}").unwrap();
    let o = dynet(&["validate", bad.to_str().unwrap()], "");
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(code(&dynet(&["validate", "/nonexistent/net"], "")), 2);
}

#[test]
fn compile_prints_the_golden_encoding() {
    let o = dynet(&["compile", &fx("fig1.net")], "");
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), read_fixture("fig1.smt2"));
    assert!(stdout(&o).contains("(declare-fun bandwidth ((Edge)) Int)"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.smt2");
    let o = dynet(&["compile", &fx("fig1.net"), "-o", out.to_str().unwrap()], "");
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(out).unwrap(), read_fixture("fig1.smt2"));

    let o = dynet(&["compile", &fx("fig1.net"), "--dialect", "standard"], "");
    assert!(stdout(&o).contains("(declare-datatypes ((Edge 0))"));
}

#[test]
fn check_exit_codes_follow_the_classification() {
    let o = dynet(&["check", &fx("fig1.net"), "--props", &fx("fig1_holds.props")], "");
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Holds"));

    let o = dynet(&["check", &fx("fig1.net"), "--props", &fx("delay_gt2.props")], "");
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("Conflict") && text.contains("joint:      unsat"), "{text}");

    let o = dynet(
        &["check", &fx("fig1.net"), "--props", &fx("delay_gt2.props"), "--format", "structured"],
        "",
    );
    let doc: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(doc["classification"], "Conflict");
    assert_eq!(doc["model"], "sat");
}

#[test]
fn solver_problems_exit_with_three() {
    let o = dynet(&["check", &fx("fig1.net"), "--solver", "no-such-solver-binary"], "");
    assert_eq!(code(&o), 3);

    let unknown = fake_solver(&["unknown"]).command.join(" ");
    let o = dynet(&["check", &fx("fig1.net"), "--solver", &unknown], "");
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("Inconclusive"));
}

#[test]
fn solver_comes_from_the_environment_unless_overridden() {
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_dynet"))
            .args(args)
            .env("DYNET_SOLVER_CMD", "no-such-solver-binary")
            .output()
            .unwrap()
    };
    assert_eq!(code(&run(&["check", &fx("fig1.net")])), 3);
    let real = solver().command.join(" ");
    assert_eq!(code(&run(&["check", &fx("fig1.net"), "--solver", &real])), 0);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["frobnicate"],
        vec!["check"],
        vec!["compile", "x", "--bogus"],
        vec!["monitor", "x", "--strict-topology=maybe"],
        vec!["simulate", "x", "--count", "1", "--seed", "1", "--fault", "zap:1-2"],
        vec!["check", "x", "--timeout-ms", "0"],
    ] {
        let o = dynet(&args, "");
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"), "{args:?}");
    }
    assert_eq!(code(&dynet(&["--help"], "")), 0);
}

#[test]
fn simulate_then_monitor_round_trip() {
    let o = dynet(&["simulate", &fx("fig1.net"), "--count", "2", "--seed", "7"], "");
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), read_fixture("fig1_seed7.snapshots"));

    let o = dynet(&["monitor", &fx("fig1.net")], &stdout(&o));
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "");
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshots=2 alerts=0 checks=60"));
}

#[test]
fn monitor_exit_codes() {
    let o = dynet(&["monitor", &fx("fig1.net"), "--snapshots", "-"], "");
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "");

    let faulty = dynet(
        &["simulate", &fx("fig1.net"), "--count", "1", "--seed", "3", "--fault", "param:1-2:delay=5"],
        "",
    );
    let o = dynet(&["monitor", &fx("fig1.net")], &stdout(&faulty));
    assert_eq!(code(&o), 1);
    assert_eq!(
        stdout(&o),
        "{\"kind\":\"param_violation\",\"src\":1,\"dst\":2,\"param\":\"delay\",\"observed\":5,\"seq\":0}\n"
    );

    let o = dynet(&["monitor", &fx("fig1.net")], "{oops\n");
    assert_eq!(code(&o), 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snaps");
    std::fs::write(&path, stdout(&faulty)).unwrap();
    let o = dynet(
        &["monitor", &fx("fig1.net"), "--snapshots", path.to_str().unwrap(), "--stop-after", "1"],
        "",
    );
    assert_eq!(code(&o), 1);

    let o = dynet(
        &["monitor", &fx("fig1.net"), "--solver", &fake_solver(&["crash"]).command.join(" ")],
        &stdout(&faulty),
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn inapplicable_fault_is_an_input_error() {
    let o = dynet(&["simulate", &fx("fig1.net"), "--count", "1", "--seed", "1", "--fault", "extra:1-2"], "");
    assert_eq!(code(&o), 2);
}
