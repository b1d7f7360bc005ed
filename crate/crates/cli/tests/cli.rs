use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rideshare"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn happy_path_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["run", "--scenario", scenario("happy_path").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let completed = report["trips"].as_array().unwrap().iter().filter(|t| t["outcome"] == "completed").count();
    assert_eq!(completed, 1);
    let total: u64 = report["balances"].as_array().unwrap().iter().map(|r| r["balance"].as_u64().unwrap()).sum();
    assert_eq!(total as u128, report["stats"]["genesis_supply"].as_u64().unwrap() as u128);
    assert!(out.join("trace.jsonl").exists() && out.join("timing.json").exists());

    let v = run(&["verify-trace", out.join("trace.jsonl").to_str().unwrap()]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("misbehaviour");
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["run", "--scenario", s.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        reports.push((fs::read(out.join("report.json")).unwrap(), fs::read(out.join("trace.jsonl")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn malformed_scenario_exits_with_schema_code_and_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = run(&["run", "--scenario", scenario("malformed").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
    assert!(!out.exists());
}

#[test]
fn missing_grid_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(scenario("happy_path")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("grid");
    let path = dir.path().join("nogrid.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--scenario", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["run", "--scenario"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["run", "--scenario", "/nonexistent.json", "--out", "/tmp/x"])), 1);
    assert_eq!(code(&run(&["bench-zksm", "--k", "1"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn edited_payment_fails_verification_naming_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["run", "--scenario", scenario("happy_path").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let mut edited = false;
    let lines: Vec<String> = text
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if !edited && v["event"] == "segment_paid" {
                let a = v["payload"]["amount"].as_u64().unwrap();
                v["payload"]["amount"] = (a + 5).into();
                edited = true;
            }
            v.to_string()
        })
        .collect();
    assert!(edited);
    let path = dir.path().join("edited.jsonl");
    fs::write(&path, lines.join("\n")).unwrap();
    let v = run(&["verify-trace", path.to_str().unwrap()]);
    assert_ne!(code(&v), 0);
    assert!(String::from_utf8_lossy(&v.stderr).contains("conservation"), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn empty_trace_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    fs::write(&path, "").unwrap();
    assert_eq!(code(&run(&["verify-trace", path.to_str().unwrap()])), 0);
}

#[test]
fn bench_prints_four_phases() {
    let o = run(&["bench-zksm", "--k", "2,4", "--reps", "2", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        for phase in ["setup", "audit", "prove", "verify"] {
            assert!(r[phase]["mean_ms"].as_f64().unwrap() >= 0.0);
        }
        assert_eq!(r["proof_bytes"], 848);
    }
}
