use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo").join(name)
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_instructplan")).args(args).output().unwrap()
}

fn run_demo(out: &Path, extra: &[&str]) -> Output {
    let (m, a, s) = (demo("manifest.json"), demo("annotations.csv"), demo("mock_script.json"));
    let mut args = vec![
        "run",
        "--manifest", m.to_str().unwrap(),
        "--annotations", a.to_str().unwrap(),
        "--mock-script", s.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
        "--seed", "1",
    ];
    args.extend_from_slice(extra);
    bin(&args)
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.jsonl");
    let out = run_demo(&results, &["--backend", "mock", "--conditions", "both", "--k", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("13 work items: 13 run, 0 already logged, 0 failed"), "{stdout}");

    let reports = dir.path().join("reports");
    let out = bin(&[
        "report",
        "--results", results.to_str().unwrap(),
        "--q", "0.975",
        "--out-dir", reports.to_str().unwrap(),
        "--manifest", demo("manifest.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Mean (All)") && stdout.contains("Mean (Q97.5)"), "{stdout}");
    for name in ["table1", "table2", "table3", "failures"] {
        for ext in ["txt", "csv"] {
            assert!(reports.join(format!("{name}.{ext}")).is_file(), "{name}.{ext}");
        }
    }
    for i in 1..=5 {
        let doc: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(reports.join(format!("overlays/scene-000{i}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(doc["ground_truth"].as_array().unwrap().len(), 10);
    }
}

#[test]
fn baseline_only_condition() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.jsonl");
    let out = run_demo(&results, &["--conditions", "baseline"]);
    assert!(out.status.success());
    let n = std::fs::read_to_string(&results).unwrap().lines().count();
    assert_eq!(n, 6, "header plus five baseline records");
}

#[test]
fn unreachable_http_backend_logs_failures() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.jsonl");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/v1");
    // the flag overrides the file's base_url
    let config = dir.path().join("backend.toml");
    std::fs::write(&config, "[backend]\nbase_url = \"http://192.0.2.1\"\nbackoff_seconds = 0.001\n").unwrap();
    let out = run_demo(
        &results,
        &["--backend", "http", "--config", config.to_str().unwrap(), "--base-url", &url, "--conditions", "baseline"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("5 failed") && stdout.contains("transport failures: 5"), "{stdout}");
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = bin(&["report", "--results", "/nonexistent/results.jsonl", "--out-dir", "/tmp/x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let dir = tempfile::tempdir().unwrap();
    let out = run_demo(&dir.path().join("r.jsonl"), &["--k", "0"]);
    assert!(!out.status.success());
    let out = run_demo(&dir.path().join("r.jsonl"), &["--horizon", "6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}
