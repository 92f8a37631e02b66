mod common;

use common::fixture_path;
use futurestep::executor::ExplorationReport;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_futurestep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fx(name: &str) -> String {
    fixture_path(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn explore_lists_outcomes() {
    let o = run(&["explore", &fx("lb.prog")]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("r1=1") && s.contains("r2=2"), "{s}");
}

#[test]
fn explore_json_roundtrip() {
    let o = run(&["explore", &fx("lb.prog"), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: ExplorationReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.outcomes.len(), 4);
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, stdout(&o));
}

#[test]
fn empty_program_has_one_outcome() {
    let o = run(&["explore", &fx("empty.prog"), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: ExplorationReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.outcomes.len(), 1);
    assert_eq!(report.outcomes[0].memory.get(&"x".into()), Some(&0));
}

#[test]
fn check_verdicts() {
    let ok = run(&["check", &fx("lb.prog"), "forbidden", "r1=1 && r2=1"]);
    assert_eq!(ok.status.code(), Some(0));
    let reach = run(&["check", &fx("lb.prog"), "reachable", "r1=1 && r2=2"]);
    assert_eq!(reach.status.code(), Some(0));
    let bad = run(&["check", &fx("lb.prog"), "forbidden", "r1=1 && r2=2"]);
    assert_eq!(bad.status.code(), Some(1));
    let rng = run(&[
        "check",
        &fx("rng.prog"),
        "--domain",
        "x=0,1,2,99,100",
        "forbidden",
        "[x ~ 99]_{1,2,3}",
    ]);
    assert_eq!(rng.status.code(), Some(0));
}

#[test]
fn replay_verdicts() {
    let h1 = run(&["replay", &fx("lb.prog"), "--trace", &fx("h1.trace")]);
    assert_eq!(h1.status.code(), Some(1));
    assert!(stdout(&h1).contains("DISALLOWED"));
    let h2 = run(&["replay", &fx("lb.prog"), "--trace", &fx("h2.trace")]);
    assert_eq!(h2.status.code(), Some(0));
    let strict = run(&["replay", &fx("lb.prog"), "--trace", &fx("h2.trace"), "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn prove_verdicts() {
    let ok = run(&["prove", &fx("lb.prog"), &fx("lb_outline.json")]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("VALID"));
    let weak = run(&["prove", &fx("lb.prog"), &fx("lb_outline_weak.json")]);
    assert_eq!(weak.status.code(), Some(1));
    assert!(stdout(&weak).contains("<- violating step"));
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(run(&["explore", "/nonexistent.prog"]).status.code(), Some(2));
    let dir = std::env::temp_dir().join(format!("futurestep-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.prog");
    std::fs::write(&bad, "1: r1 := [x\n").unwrap();
    let o = run(&["explore", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.prog: 2:1: expected `]`"));
    assert_eq!(
        run(&["check", &fx("lb.prog"), "forbidden", "r9 = 1"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn budget_exit_3() {
    assert_eq!(
        run(&["explore", &fx("lb.prog"), "--budget", "2"]).status.code(),
        Some(3)
    );
}

#[test]
fn malformed_outline_exit_4() {
    let dir = std::env::temp_dir().join(format!("futurestep-outline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("outline.json");
    // `2` before `1` is not a sub-future of thread 1's futures.
    let text = r#"{"pre": "true", "post": "true", "threads": {
        "1": {"subfutures": {"F": {"labels": ["1@0", "2"], "order": [["2", "1@0"]]}}, "assertions": {"F": "true"}, "default": "true"},
        "2": {"subfutures": {}, "assertions": {}, "default": "true"}}}"#;
    std::fs::write(&path, text).unwrap();
    let o = run(&["prove", &fx("lb.prog"), path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(
        run(&["prove", &fx("lb.prog"), path.to_str().unwrap()]).status.code(),
        Some(4)
    );
}

#[test]
fn futures_dump_reloads() {
    let o = run(&["futures", &fx("lb.prog")]);
    assert_eq!(o.status.code(), Some(0));
    let dir = std::env::temp_dir().join(format!("futurestep-futures-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("lb.futures.json");
    std::fs::write(&path, &o.stdout).unwrap();
    let a = run(&["explore", &fx("lb.prog"), "--format", "json"]);
    let b = run(&[
        "explore",
        &fx("lb.prog"),
        "--futures",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(b.status.code(), Some(0), "{}", String::from_utf8_lossy(&b.stderr));
    let ra: ExplorationReport = serde_json::from_str(&stdout(&a)).unwrap();
    let rb: ExplorationReport = serde_json::from_str(&stdout(&b)).unwrap();
    let regs = |r: &ExplorationReport| r.outcomes.iter().map(|o| o.registers.clone()).collect::<Vec<_>>();
    assert_eq!(regs(&ra), regs(&rb));
}
