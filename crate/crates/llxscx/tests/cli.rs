//! Black-box tests of the command line contract: subcommands, flags, output
//! shapes, and exit codes (0 pass, 1 violation, 2 usage, 3 budget).

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_llxscx"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_lines(path: &Path, lines: &[&str]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn stress_smoke_run_checks_clean() {
    let (code, stdout, _) = run(&[
        "stress",
        "--threads",
        "4",
        "--ops",
        "1000",
        "--key-range",
        "8",
        "--mix",
        "34,33,33",
        "--seed",
        "7",
        "--check",
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(stdout.contains("check: linearizable"));
    assert!(stdout.contains("4000 ops"));
}

#[test]
fn stress_machine_output_is_one_json_line() {
    let (code, stdout, _) = run(&[
        "stress",
        "--threads",
        "2",
        "--ops",
        "50",
        "--seed",
        "3",
        "--check",
        "--machine",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["implementation"], "lockfree");
    assert_eq!(v["controlled"], false);
    assert_eq!(v["total_ops"], 100);
    assert_eq!(v["check"], "linearizable");
    assert_eq!(v["history_events"], 200);
    assert_eq!(v["per_process"].as_array().unwrap().len(), 2);
    assert!(v["throughput_ops_per_sec"].as_f64().unwrap() > 0.0);
}

#[test]
fn saved_histories_pass_the_check_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.ndjson");
    let (code, _, _) = run(&[
        "stress",
        "--threads",
        "3",
        "--ops",
        "80",
        "--seed",
        "11",
        "--save",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let (code, stdout, _) = run(&["check", "--history", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("linearizable"));

    let (code, stdout, _) = run(&["check", "--history", path.to_str().unwrap(), "--machine"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["verdict"], "linearizable");
    assert_eq!(v["events"], 480);
}

#[test]
fn controlled_runs_with_one_seed_save_identical_histories() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ndjson");
    let b = dir.path().join("b.ndjson");
    for path in [&a, &b] {
        let (code, _, _) = run(&[
            "stress",
            "--threads",
            "3",
            "--ops",
            "100",
            "--seed",
            "5",
            "--controlled",
            "--save",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let ha = std::fs::read(&a).unwrap();
    let hb = std::fs::read(&b).unwrap();
    assert!(!ha.is_empty());
    assert_eq!(ha, hb);
}

#[test]
fn locked_baseline_is_also_checkable() {
    let (code, stdout, _) = run(&[
        "stress",
        "--threads",
        "3",
        "--ops",
        "60",
        "--impl",
        "locked",
        "--check",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("locked impl"));
    assert!(stdout.contains("check: linearizable"));
}

#[test]
fn bad_mix_is_a_usage_error() {
    let (code, _, stderr) = run(&["stress", "--ops", "1", "--mix", "33,33,33"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("sum to 100"));

    let (code, _, _) = run(&["stress", "--mix", "a,b,c"]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["stress", "--mix", "50,50"]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_flags_and_subcommands_are_usage_errors() {
    let (code, _, _) = run(&["stress", "--frobnicate"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&[]);
    assert_eq!(code, 2);
}

#[test]
fn missing_and_malformed_history_files_are_usage_errors() {
    let (code, _, stderr) = run(&["check", "--history", "/nonexistent/h.ndjson"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("cannot read history"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.ndjson");
    write_lines(
        &path,
        &[
            r#"{"seq":0,"process":0,"op":"get","args":{"key":0},"kind":"invoke"}"#,
            "not json",
        ],
    );
    let (code, _, stderr) = run(&["check", "--history", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 2"));

    // Well-formed JSON that is not a well-formed history is also usage.
    let path = dir.path().join("broken.ndjson");
    write_lines(
        &path,
        &[r#"{"seq":0,"process":0,"op":"get","args":{"key":0},"kind":"respond","value":0}"#],
    );
    let (code, _, stderr) = run(&["check", "--history", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("malformed history"));
}

#[test]
fn a_non_linearizable_history_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ndjson");
    write_lines(
        &path,
        &[
            r#"{"seq":0,"process":0,"op":"get","args":{"key":0},"kind":"invoke"}"#,
            r#"{"seq":1,"process":0,"op":"get","args":{"key":0},"kind":"respond","value":5}"#,
        ],
    );
    let (code, stdout, _) = run(&["check", "--history", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("not linearizable"));
}

#[test]
fn an_exhausted_budget_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.ndjson");
    write_lines(
        &path,
        &[
            r#"{"seq":0,"process":0,"op":"insert","args":{"key":0,"count":1},"kind":"invoke"}"#,
            r#"{"seq":1,"process":0,"op":"insert","args":{"key":0,"count":1},"kind":"respond"}"#,
            r#"{"seq":2,"process":0,"op":"get","args":{"key":0},"kind":"invoke"}"#,
            r#"{"seq":3,"process":0,"op":"get","args":{"key":0},"kind":"respond","value":1}"#,
        ],
    );
    let (code, stdout, _) = run(&[
        "check",
        "--history",
        path.to_str().unwrap(),
        "--budget",
        "0",
    ]);
    assert_eq!(code, 3, "stdout: {stdout}");
    assert!(stdout.contains("budget exhausted"));

    let (code, _, _) = run(&["check", "--history", path.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn steps_verifies_the_closed_forms() {
    let (code, stdout, _) = run(&["steps", "--v", "3", "--r", "2"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("4 cas (expected 4)"));
    assert!(stdout.contains("4 writes (expected 4)"));
    assert!(stdout.trim_end().ends_with("pass"));

    let (code, stdout, _) = run(&["steps", "--v", "1", "--r", "0", "--machine"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["cas"], 2);
    assert_eq!(v["writes"], 2);
    assert_eq!(v["vlx_reads"], 1);
    assert_eq!(v["pass"], true);
}

#[test]
fn steps_rejects_out_of_range_shapes() {
    let (code, _, stderr) = run(&["steps", "--v", "2", "--r", "3"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("at most"));

    let (code, _, _) = run(&["steps", "--v", "0", "--r", "0"]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["steps", "--v", "65", "--r", "0"]);
    assert_eq!(code, 2);
}
