use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../corpus/{name}.lit"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moca-verify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_on(args: &[&str], file: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.push(file.to_str().unwrap());
    run(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn clean_program_exits_zero() {
    let o = run_on(&["verify"], &corpus("mp"));
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("distinct_traces: 3"), "{out}");
    assert!(out.contains("expect traces = 3: ok"), "{out}");
}

#[test]
fn assertion_violation_exits_one() {
    let o = run_on(&["verify"], &corpus("Luc10"));
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("violations: 1"));
}

#[test]
fn race_exits_one() {
    let o = run_on(&["verify", "--json"], &corpus("simple-sw"));
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["exit_code"], 1);
    assert_eq!(v["report"]["sequences_explored"], 3);
    assert_eq!(v["report"]["racy_sequence_count"], 2);
}

#[test]
fn budget_exhaustion_exits_three() {
    let o = run_on(&["verify", "--no-expect", "--max-seqs", "1"], &corpus("sb"));
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("complete: false"));
}

#[test]
fn finding_outranks_budget() {
    let o = run_on(&["verify", "--max-seqs", "1"], &corpus("sb"));
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("MISMATCH"));
}

#[test]
fn missing_file_and_bad_syntax_exit_two() {
    assert_eq!(code(&run(&["verify", "/nonexistent.lit"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.lit", "init x\nthread T1:\n  store(z, 1, rlx)\n");
    let o = run_on(&["verify"], &bad);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert_eq!(code(&run(&["verify", "--bogus-flag"])), 2);
}

#[test]
fn expectation_mismatch_is_a_finding() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(corpus("CoRR")).unwrap().replace("traces = 3", "traces = 4");
    let f = write(&dir, "corr.lit", &text);
    let o = run_on(&["verify", "--json"], &f);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["expectations"][0]["ok"], false);
    assert_eq!(v["expectations"][0]["actual"], 3);
    assert_eq!(code(&run_on(&["verify", "--no-expect"], &f)), 0);
}

#[test]
fn several_files_report_the_worst_status() {
    let o = run(&[
        "verify",
        "--json",
        corpus("mp").to_str().unwrap(),
        corpus("Luc10").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["exit_code"], 0);
    assert_eq!(v[1]["exit_code"], 1);
}

#[test]
fn jobs_do_not_change_the_report() {
    let one = json(&run_on(&["verify", "--json", "--jobs", "1"], &corpus("WW+RR")));
    let many = json(&run_on(&["verify", "--json", "--jobs", "4"], &corpus("WW+RR")));
    assert_eq!(one, many);
    assert_eq!(one["report"]["distinct_traces"], 15);
}

#[test]
fn enumerate_reports_the_same_traces() {
    let e = json(&run_on(&["enumerate", "--json"], &corpus("sb")));
    let v = json(&run_on(&["verify", "--json"], &corpus("sb")));
    let mut explored: Vec<&str> = v["report"]["traces"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["id"].as_str().unwrap())
        .collect();
    explored.sort();
    let enumerated: Vec<&str> = e["trace_ids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_str().unwrap())
        .collect();
    assert_eq!(explored, enumerated);
    assert!(e["sequences"].as_u64().unwrap() > 4);
}

#[test]
fn enumerate_refuses_large_programs() {
    let o = run_on(&["enumerate", "--cap", "4"], &corpus("fibonacci-2"));
    assert_eq!(code(&o), 2);
}

#[test]
fn transform_emits_hoisted_program() {
    let o = run_on(&["transform", "--emit-transformed"], &corpus("Luc10"));
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let t1 = out.split("thread T1:\n").nth(1).unwrap();
    assert!(t1.trim_start().starts_with("store(y, 1, rlx)"), "{out}");
    let v = json(&run_on(&["transform", "--json"], &corpus("Luc10")));
    assert_eq!(v["changed"], true);
    let v = json(&run_on(&["transform", "--json"], &corpus("mp")));
    assert_eq!(v["changed"], false);
}

#[test]
fn replay_of_a_schedule_from_the_report() {
    let v = json(&run_on(&["verify", "--json"], &corpus("Luc10")));
    let schedule = v["report"]["violations"][0]["schedule"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_str().unwrap())
        .collect::<Vec<_>>()
        .join(" ");
    let dir = tempfile::tempdir().unwrap();
    let s = write(&dir, "sched.txt", &format!("# violating run\n{schedule}\n"));
    let o = run(&[
        "verify",
        corpus("Luc10").to_str().unwrap(),
        "--json",
        "--replay",
        s.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["maximal"], true);
    assert_eq!(r["trace"], v["report"]["violations"][0]["trace"]);
    assert_eq!(r["violated_asserts"][0], 0);
}

#[test]
fn replay_rejects_unknown_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(&dir, "sched.txt", "T1 T9\n");
    let o = run(&["verify", corpus("mp").to_str().unwrap(), "--replay", s.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn relations_of_a_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(&dir, "sched.txt", "T1 sh(T1,data) T1 sh(T1,flag) T2 T2\n");
    let f = corpus("simple-sw");
    let args = ["relations", f.to_str().unwrap(), "--replay", s.to_str().unwrap()];
    let o = run(&args);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("sw: "));
    let mut with_json = args.to_vec();
    with_json.push("--json");
    let v = json(&run(&with_json));
    assert!(!v["sw"].as_array().unwrap().is_empty(), "{v}");
    let mut with_dot = args.to_vec();
    with_dot.push("--dot");
    assert!(stdout(&run(&with_dot)).starts_with("digraph"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}
