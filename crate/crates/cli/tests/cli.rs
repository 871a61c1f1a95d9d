use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gsp-transient"))
}

fn config(dir: &Path, iterations: usize) -> std::path::PathBuf {
    let p = dir.join("run.json");
    std::fs::write(
        &p,
        format!(
            r#"{{"k": 6, "f": 30, "sample_size": 40, "scenario": "iii", "algorithm": "rls",
                "param": 0.79, "iterations": {iterations}, "runs": 16, "master_seed": 21,
                "synthetic_nodes": 80}}"#
        ),
    )
    .unwrap();
    p
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 80);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("r{threads}.csv"));
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn iteration_override_sets_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 80);
    let out = dir.path().join("r.csv");
    let status = bin()
        .args(["run", "--iterations", "3", "--runs", "2", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("t,msd_emp_db,msd_theory_paper_db,msd_theory_exact_db\n"));
    assert!(dir.path().join("r.manifest.json").exists());

    let report = bin().args(["compare", "--results"]).arg(&out).output().unwrap();
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("exact"));
}

#[test]
fn failures_exit_with_category_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"algorithm": "lms", "scenario": "v", "bogus": 1}"#).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&bad)
        .args(["--out", "x.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));

    let missing = bin()
        .args(["build-graph", "--k", "3", "--stations"])
        .arg(dir.path().join("nope.csv"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn synth_then_build_graph() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("st.csv");
    assert!(bin()
        .args(["synth", "--nodes", "40", "--seed", "3", "--out"])
        .arg(&csv)
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args(["build-graph", "--k", "4", "--stations"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("N = 40, k = 4"));
}
