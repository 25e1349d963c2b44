use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strongred"))
}

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn().unwrap();
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    } else {
        drop(child.stdin.take());
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CYCLE5: &str = "p 1\nnodes 5\nedge 0 1 0 0\nedge 1 2 0 0\nedge 2 3 0 0\nedge 3 4 0 0\nedge 4 0 0 0\n";

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_cycle_keeps_all_edges() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_temp(&dir, "cycle5.txt", CYCLE5);
    let o = run(&["solve", "--objective", "min", &f], None);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("keep")).count(), 5);
    assert!(out.contains("lower_bound 5 ratio 1.000"), "{out}");
}

#[test]
fn generated_gap_instance_has_optimum_seven() {
    let gen = run(&["gen", "gap", "3"], None);
    assert!(gen.status.success());
    let o = run(&["solve", "--objective", "min", "--exact", "-"], Some(&stdout(&gen)));
    assert!(o.status.success());
    assert!(stdout(&o).contains("# optimum 7"), "{}", stdout(&o));
}

#[test]
fn verify_reports_missing_required_edge() {
    let dir = tempfile::tempdir().unwrap();
    let inst = "p 1\nnodes 3\nedge 0 1 0 0\nedge 1 0 0 1\nedge 1 2 0 0\nedge 2 0 0 0\n";
    let f = write_temp(&dir, "inst.txt", inst);
    let s = write_temp(&dir, "sol.txt", "keep 0 1\nkeep 1 2\nkeep 2 0\n");
    let o = run(&["verify", &f, &s], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("required edge 1 -> 0"), "{err}");
    let ok = write_temp(&dir, "ok.txt", "keep 0 1\nkeep 1 0\nkeep 1 2\nkeep 2 0\n");
    assert!(run(&["verify", &f, &ok], None).status.success());
}

#[test]
fn solutions_round_trip_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(&["gen", "random", "--n", "12", "--m", "40", "--p", "3", "--d", "0.2", "--seed", "9"], None);
    let f = write_temp(&dir, "r.txt", &stdout(&gen));
    for goal in ["min", "max"] {
        let o = run(&["solve", "--objective", goal, &f], None);
        assert!(o.status.success(), "{goal}");
        let s = write_temp(&dir, "s.txt", &stdout(&o));
        assert!(run(&["verify", &f, &s], None).status.success(), "{goal}");
    }
}

#[test]
fn rejects_bad_input_and_budget() {
    let o = run(&["solve", "-"], Some("p 4\nnodes 2\n"));
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["solve", "-"], Some("p 1\nnodes 2\nedge 0 1 0 0\nedge 0 1 0 0\n"));
    assert_eq!(o.status.code(), Some(1));
    let gen = run(&["gen", "random", "--n", "12", "--m", "120", "--seed", "1"], None);
    let o = run(&["solve", "--exact", "--budget", "5", "-"], Some(&stdout(&gen)));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn instance_output_is_stable() {
    let a = run(&["--deterministic", "gen", "random", "--n", "8", "--m", "20", "--p", "5", "--seed", "4"], None);
    let text = stdout(&a);
    let dir = tempfile::tempdir().unwrap();
    let f = write_temp(&dir, "g.txt", &text);
    let s1 = stdout(&run(&["--deterministic", "solve", &f], None));
    let s2 = stdout(&run(&["--deterministic", "solve", &f], None));
    assert_eq!(s1, s2);
    let b = run(&["--deterministic", "gen", "random", "--n", "8", "--m", "20", "--p", "5", "--seed", "4"], None);
    assert_eq!(text, stdout(&b));
}

#[test]
fn json_report_fields() {
    let o = run(&["solve", "--json", "-"], Some(CYCLE5));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["instance", "n", "m", "p", "|D|", "lower_bound", "solution_size", "deletions", "optimum", "ratio", "case_trace_summary", "fallbacks", "wall_time_ms", "seed"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["solution_size"], 5);
}

#[test]
fn bench_writes_sorted_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let o = run(&["bench", "--suite", "gap", "--seed", "1", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let names: Vec<&str> = v["instances"].as_array().unwrap().iter().map(|r| r["instance"].as_str().unwrap()).collect();
    assert_eq!(names, vec!["gap-2", "gap-3", "gap-4", "gap-5"]);
    let optima: Vec<u64> = v["instances"].as_array().unwrap().iter().map(|r| r["optimum"].as_u64().unwrap()).collect();
    assert_eq!(optima, vec![4, 7, 10, 12]);
}

#[test]
fn sat_gadget_from_clauses() {
    let gen = run(&["gen", "sat", "--vars", "1", "1", "1", "-1", "-1"], None);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let o = run(&["solve", "--exact", "-"], Some(&stdout(&gen)));
    assert!(stdout(&o).contains("# optimum 14"));
}
