use std::process::{Command, Output};

fn wftune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wftune"))
        .args(args)
        .output()
        .unwrap()
}

const SMALL: &[&str] = &["--phases", "2", "--per-phase", "15"];

fn run(extra: &[&str]) -> Output {
    let mut args = vec!["run"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    wftune(&args)
}

#[test]
fn baseline_writes_csv_to_stdout() {
    let out = run(&[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,algo,tot_work,opt_tot_work,ratio,oracle_calls,wall_ms");
    assert_eq!(lines.len(), 31);
    assert!(lines[1..].iter().all(|l| l.contains(",baseline,") && l.ends_with(",0")));
}

#[test]
fn identical_invocations_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&["--scenario", "all", "--lag", "5", "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    for algo in ["baseline", "wfit-ind", "good-feedback", "bad-feedback", "lagged-5", "auto-partition"] {
        assert_eq!(text.matches(&format!(",{algo},")).count(), 30, "{algo}");
    }
}

#[test]
fn saved_workload_replays() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    let first = run(&["--seed", "3", "--save-workload", w.to_str().unwrap()]);
    let second = wftune(&["run", "--seed", "3", "--workload-file", w.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn partition_auto_runs_the_auto_scenario() {
    let out = run(&["--partition", "auto"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains(",auto-partition,"));
    let out = run(&["--partition", "auto", "--scenario", "wfit-ind"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_with_2() {
    for extra in [
        &["--state-cnt", "10"][..],
        &["--scenario", "nope"][..],
        &["--scenario", "lagged", "--lag", "0"][..],
    ] {
        let out = run(extra);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("wftune:"));
    }
    // argument parsing errors use the same code
    assert_eq!(wftune(&["run", "--phases", "x"]).status.code(), Some(2));
}

#[test]
fn missing_workload_file_is_an_io_error() {
    let out = wftune(&["run", "--workload-file", "/nonexistent/w.json"]);
    assert_eq!(out.status.code(), Some(1));
}
