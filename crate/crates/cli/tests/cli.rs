use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const LAPLACIAN: &str =
    r#"{"problem": {"generator": "laplacian", "m": 8}, "solver": "ilrsi", "shifts": {"penzl": {"m": 6}}}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riccati-si"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn laplacian_run_converges_and_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lap.json", LAPLACIAN);
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,dim,rank,rel_residual,seconds"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    let last: f64 = rows.last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(last <= 1e-8);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "converged");
    assert_eq!(summary["shift_origin"], "penzl_A");
}

#[test]
fn negative_tol_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"problem": {"generator": "laplacian", "m": 4}, "solver": "ilrsi", "shifts": {"penzl": {}}, "tol": -1}"#,
    );
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`tol`"));
    assert!(!dir.path().join("history.csv").exists());
}

#[test]
fn max_iter_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "short.json",
        r#"{"problem": {"generator": "laplacian", "m": 8}, "solver": "ilrsi", "shifts": {"penzl": {}}, "max_iter": 2}"#,
    );
    assert_eq!(run(&["run", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn dense_threshold_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", r#"{"problem": {"generator": "laplacian", "m": 6}, "solver": "dense_exact"}"#);
    let out = bin().args(["run", "--config", s(&cfg)]).env("RICCATI_SI_DENSE_THRESHOLD", "20").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RICCATI_SI_DENSE_THRESHOLD"));
    let out = bin().args(["run", "--config", s(&cfg)]).env("RICCATI_SI_DENSE_THRESHOLD", "36").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn runs_are_byte_identical_without_timing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = r#"{"problem": {"generator": "laplacian", "m": 8}, "solver": "rksm", "shifts": {"adaptive": "stabilized"}}"#;
    for d in [&a, &b] {
        let cfg = write(d.path(), "r.json", text);
        assert_eq!(run(&["run", "--config", s(&cfg)]).status.code(), Some(0));
    }
    for f in ["history.csv", "summary.json", "shifts.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn compare_needs_two_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lap.json", LAPLACIAN);
    let out = run(&["compare", "--configs", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_rejects_different_problems() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", LAPLACIAN);
    let b = write(dir.path(), "b.json", &LAPLACIAN.replace("\"m\": 8", "\"m\": 9"));
    let out = run(&["compare", "--configs", s(&a), s(&b), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_configs_tie() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", LAPLACIAN);
    let b = write(dir.path(), "b.json", LAPLACIAN);
    let out_dir = dir.path().join("cmp");
    let out = run(&["compare", "--configs", s(&a), s(&b), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["winner"], "tie");
    let merged = std::fs::read_to_string(out_dir.join("merged.csv")).unwrap();
    assert_eq!(merged.lines().next(), Some("dim,a,b"));
    assert!(out_dir.join("a").join("history.csv").exists());
}

#[test]
fn verify_identities_passes() {
    let out = run(&["verify", "--suite", "identities", "--instances", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn corrupted_t_fails_verification_by_name() {
    let out = run(&["verify", "--suite", "identities", "--instances", "1", "--corrupt-t"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check_sylvester_identity"));
}

#[test]
fn unknown_suite_is_a_config_error() {
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(1));
}

#[test]
fn generated_files_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lap.json", LAPLACIAN);
    assert_eq!(run(&["generate", "--config", s(&cfg), "--out", s(dir.path())]).status.code(), Some(0));
    let files = write(
        dir.path(),
        "files.json",
        r#"{"problem": {"generator": "files", "a": "A.mtx", "b": "B.mtx", "c": "C.mtx"}, "solver": "ilrsi", "shifts": {"penzl": {"m": 6}},
            "output": {"history": "files.csv"}}"#,
    );
    assert_eq!(run(&["run", "--config", s(&cfg)]).status.code(), Some(0));
    assert_eq!(run(&["run", "--config", s(&files)]).status.code(), Some(0));
    let a = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("files.csv")).unwrap();
    assert_eq!(a.lines().count(), b.lines().count());
}
