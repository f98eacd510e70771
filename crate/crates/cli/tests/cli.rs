use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn cobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cobs"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cobs(args);
    assert!(
        out.status.success(),
        "cobs {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three tight blobs of 20 points, with a header and a label column.
fn blobs(dir: &Path) -> PathBuf {
    let mut csv = String::from("x,y,class\n");
    let centers = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
    for (c, (cx, cy)) in centers.iter().enumerate() {
        for k in 0..20 {
            let t = k as f64 * 0.7;
            csv.push_str(&format!("{},{},c{c}\n", cx + 0.3 * t.cos(), cy + 0.3 * t.sin() * (k % 3) as f64 / 2.0));
        }
    }
    let p = dir.join("blobs.csv");
    std::fs::write(&p, csv).unwrap();
    p
}

fn grid(dir: &Path) -> PathBuf {
    let p = dir.join("grid.json");
    std::fs::write(
        &p,
        r#"{"kmeans": {"k": {"lo": 2, "hi": 5}, "seeds": 3},
            "dbscan": {"eps_count": 4, "min_pts": {"lo": 3, "hi": 5}},
            "spectral": {"k": {"lo": 2, "hi": 4}, "knn": {"lo": 5, "hi": 6}}}"#,
    )
    .unwrap();
    p
}

#[test]
fn generate_constraints_select() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let ens = dir.path().join("ens.json");
    let out = ok(&[
        "generate", "--data", s(&data), "--label-col", "class", "--grid", s(&grid(dir.path())), "--out", s(&ens),
        "--workers", "2",
    ]);
    assert!(out.contains("30 clusterings (K:12/D:12/S:6)"), "{out}");
    let e: Value = serde_json::from_slice(&std::fs::read(&ens).unwrap()).unwrap();
    assert_eq!(e["clusterings"].as_array().unwrap().len(), 30);
    assert_eq!(e["dataset"], "blobs");

    let cs = dir.path().join("cs.json");
    let out = ok(&["constraints", "--data", s(&data), "--label-col", "2", "--count", "15", "--seed", "4", "--out", s(&cs)]);
    assert!(out.contains("15 constraints"), "{out}");
    let list: Value = serde_json::from_slice(&std::fs::read(&cs).unwrap()).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 15);
    assert!(list[0]["kind"].is_string());

    let sel = dir.path().join("sel.txt");
    let out = ok(&["select", "--ensemble", s(&ens), "--constraints", s(&cs), "--seed", "1", "--out", s(&sel)]);
    assert!(out.contains("satisfied 15/15"), "{out}");
    let labels: Vec<i32> = std::fs::read_to_string(&sel).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(labels.len(), 60);
    // Same inputs, same pick.
    assert_eq!(out, ok(&["select", "--ensemble", s(&ens), "--constraints", s(&cs), "--seed", "1", "--out", s(&sel)]));
}

#[test]
fn active_with_labels_and_interactive() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(dir.path());
    let ens = dir.path().join("ens.json");
    ok(&["generate", "--data", s(&data), "--label-col", "class", "--grid", s(&grid(dir.path())), "--out", s(&ens)]);

    let report = dir.path().join("report.json");
    let out = ok(&[
        "active", "--ensemble", s(&ens), "--data", s(&data), "--label-col", "class", "--budget", "12", "--m", "2",
        "--pool", "300", "--oracle", "labels", "--out", s(&report),
    ]);
    assert!(out.contains("answered 12/12"), "{out}");
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["answers"].as_array().unwrap().len(), 12);
    assert_eq!(r["ari"], 1.0);

    let mut child = Command::new(env!("CARGO_BIN_EXE_cobs"))
        .args(["active", "--ensemble", s(&ens), "--budget", "5", "--oracle", "interactive"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"m\nhuh\nc\nq\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("answered 2/5"), "{stdout}");
    assert!(String::from_utf8(out.stderr).unwrap().contains("query 3/5"));

    let out = cobs(&["active", "--ensemble", s(&ens), "--oracle", "labels"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--label-col"));
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    blobs(dir.path());
    let spec = dir.path().join("bench.json");
    std::fs::write(
        &spec,
        r#"{"data": "blobs.csv", "label_col": "class", "name": "blobs",
            "grid": {"kmeans": {"k": {"lo": 2, "hi": 4}, "seeds": 2}},
            "constraint_counts": [0, 10], "repetitions": 3, "baselines": ["silhouette-kmeans"]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = ok(&["bench", "--spec", s(&spec), "--out", s(&out_dir)]);
    assert!(out.starts_with("dataset,method,c,mean_ari"), "{out}");
    for f in ["results.csv", "results.json", "runs.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let runs: Value = serde_json::from_slice(&std::fs::read(out_dir.join("runs.json")).unwrap()).unwrap();
    assert!(runs.as_array().unwrap().len() >= 6);

    std::fs::write(&spec, r#"{"data": "blobs.csv", "name": "x", "constraint_counts": [5, 5]}"#).unwrap();
    assert!(!cobs(&["bench", "--spec", s(&spec), "--out", s(&out_dir)]).status.success());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    let out = cobs(&["generate", "--data", s(&bad), "--out", s(&dir.path().join("e.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("oops"));
    let out = cobs(&["select", "--ensemble", "missing.json", "--constraints", "missing.json"]);
    assert!(!out.status.success());
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut response = String::new();
    stream.read_to_string(&mut response).ok()?;
    Some(response)
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "hello").unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_cobs"))
        .args(["serve", "--port", &port.to_string(), "--store", s(&dir.path().join("store")), "--ui", s(&ui)])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    let response = loop {
        if let Some(r) = http_get(port, "/sessions/nope") {
            break r;
        }
        assert!(start.elapsed() < Duration::from_secs(30), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    let ui_page = http_get(port, "/ui/index.html").unwrap_or_default();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 404"), "{response}");
    assert!(response.contains(r#""code":"not_found""#), "{response}");
    assert!(ui_page.starts_with("HTTP/1.1 200") && ui_page.ends_with("hello"), "{ui_page}");
}
