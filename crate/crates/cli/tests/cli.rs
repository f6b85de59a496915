mod common;

use std::process::Command;

use common::{corpus_dir, stdout, Server, BIN};
use serde_json::Value;

#[test]
fn submit_poll_and_queue_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(&dir.path().join("j.jsonl"), 200);
    let bell = corpus_dir().join("bell.qasm");
    let ghz = corpus_dir().join("ghz3.quirk");

    let out = server.run(&["submit", bell.to_str().unwrap(), "--shots", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bell_id = stdout(&out);
    let out = server.run(&["submit", ghz.to_str().unwrap(), "--shots", "500"]);
    let ghz_id = stdout(&out);

    let out = server.run(&["result", &bell_id, "--wait", "20", "--requested"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "DONE");
    assert_eq!(v["shots"], 500);
    assert_eq!(v["name"], "bell");

    let out = server.run(&["result", &ghz_id, "--wait", "20"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let keys: Vec<&String> = v["counts"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["000", "111"]);
    assert_eq!(v["batch_id"], serde_json::from_str::<Value>(&stdout(&server.run(&["result", &bell_id]))).unwrap()["batch_id"]);

    let out = server.run(&["queue"]);
    let q: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(q["jobs"], Value::Array(vec![]));
}

#[test]
fn api_errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(&dir.path().join("j.jsonl"), 200);
    let bad = dir.path().join("bad.qasm");
    std::fs::write(&bad, "OPENQASM 2.0;\nqreg q[2];\nfrobnicate q[0];\n").unwrap();
    let out = server.run(&["submit", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid_circuit") && err.contains("frobnicate"), "{err}");
    assert!(err.contains("\"line\":3"), "{err}");

    let wide = dir.path().join("wide.qasm");
    std::fs::write(&wide, "qreg q[20];\nh q;\n").unwrap();
    let out = server.run(&["submit", wide.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too_wide"));

    let out = server.run(&["result", "no-such-job"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("404"));
}

#[test]
fn unreachable_server_is_reported_distinctly() {
    let out = Command::new(BIN)
        .args(["queue", "--server", "http://127.0.0.1:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot reach server"));
}

#[test]
fn bench_writes_csv_and_reports_missing_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("report.csv");
    let out = Command::new(BIN)
        .arg("bench")
        .arg(corpus_dir())
        .args(["--shots", "2000", "--output"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("job_id,name,width,shots,hellinger,wasserstein\n"));
    assert!(text.lines().last().unwrap().starts_with("summary,mean_pct,27,2000,"));

    let out = Command::new(BIN)
        .args(["bench", "/definitely/not/here", "--output"])
        .arg(dir.path().join("nope.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("nope.csv").exists());
}
