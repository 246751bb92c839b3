use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;

fn intent() -> Command {
    Command::new(env!("CARGO_BIN_EXE_intent"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = intent().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const SMALL_SCENARIO: &str = r#"{
  "map": {"width": 12, "height": 9, "cell_size": 0.5, "obstacles": [[5, 3], {"x": 5, "y": 5, "w": 1, "h": 3}]},
  "goals": [[0, 0], [11, 0], [11, 8]],
  "start": [3, 4],
  "segments": [{"goal": 1, "alpha": 8, "duration": 10}, {"goal": 2, "alpha": 8, "duration": 15}],
  "seed": 4,
  "methods": [{"variant": "B", "fixed_alpha": 2}, {"variant": "P", "fixed_alpha": 2}],
  "prediction": {"M": 60, "T": 6}
}"#;

#[test]
fn case_study_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("case1");
    let (code, stdout, stderr) = run(&["run", "--preset", "case1", "--trials", "2", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("Kruskal-Wallis"));
    for m in ["B", "A", "G", "P"] {
        let csv = String::from_utf8(read(&out.join(format!("metrics_{m}.csv")))).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("trial,step,x,y,true_goal"));
        assert!(lines.count() > 200);
    }
    let summary = String::from_utf8(read(&out.join("summary.csv"))).unwrap();
    for index in ["prediction_error", "true_goal_prob", "alpha_error"] {
        for m in ["B", "A", "G", "P"] {
            let n = summary.lines().filter(|l| l.starts_with(&format!("{index},{m},"))).count();
            assert_eq!(n, 1, "{index} {m}");
        }
    }
    let stats: Value = serde_json::from_slice(&read(&out.join("stats.json"))).unwrap();
    assert_eq!(stats["prediction_error"]["methods"], serde_json::json!(["B", "A", "G", "P"]));
    assert!(stats["prediction_error"]["test"]["p_omnibus"].is_number());
    assert!(!out.join("timing.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |out: &Path, jobs: &str| {
        let (code, _, e) = run(&["run", "--preset", "mc", "--trials", "3", "--seed", "11", "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{e}");
    };
    args(&a, "1");
    args(&b, "2");
    for f in ["metrics_B.csv", "metrics_A.csv", "metrics_G.csv", "metrics_P.csv", "summary.csv", "stats.json"] {
        assert!(read(&a.join(f)) == read(&b.join(f)), "{f} differs");
    }
}

#[test]
fn scenario_file_and_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    std::fs::write(&file, SMALL_SCENARIO).unwrap();
    let out = dir.path().join("out");
    let (code, stdout, e) = run(&[
        "run", "--scenario", file.to_str().unwrap(), "--methods", "B,P", "--trials", "2", "--out", out.to_str().unwrap(), "--benchmark",
    ]);
    assert_eq!(code, 0, "{e}");
    assert!(stdout.contains("ms/step"));
    assert!(out.join("metrics_B.csv").exists() && out.join("metrics_P.csv").exists());
    assert!(!out.join("metrics_A.csv").exists());
    let bench: Value = serde_json::from_slice(&read(&out.join("bench.json"))).unwrap();
    assert!(bench["methods"]["P"]["total"]["mean_ms"].as_f64().unwrap() > 0.0);
    let timing = String::from_utf8(read(&out.join("timing.csv"))).unwrap();
    assert!(timing.starts_with("trial,method,step,inference_ms,prediction_ms,total_ms"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["run", "--preset", "case9", "--out", out]).0, 2);
    assert_eq!(run(&["run", "--preset", "case1", "--methods", "B,X", "--out", out]).0, 2);
    assert_eq!(run(&["run", "--preset", "case1", "--trials", "0", "--out", out]).0, 2);
    assert_eq!(run(&["run", "--out", out]).0, 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"map\": {\"width\": 3,\n}").unwrap();
    let (code, _, err) = run(&["run", "--scenario", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");

    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, SMALL_SCENARIO.replace("[3, 4]", "[5, 3]")).unwrap();
    let (code, _, err) = run(&["run", "--scenario", invalid.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 2);
    assert!(err.contains("start"), "{err}");
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = file.join("sub");
    let (code, _, err) = run(&["run", "--preset", "case1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server() -> (Server, String) {
    let mut child = intent()
        .args(["serve", "--addr", "127.0.0.1:0", "--preset", "case1", "--seed", "5"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let stdout = child.stdout.take().unwrap();
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("address line").to_string();
    (Server(child), addr)
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("event in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.to_string().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_protocol() {
    let (_server, addr) = start_server();

    let body = tokio::task::spawn_blocking({
        let addr = addr.clone();
        move || {
            use std::io::{Read, Write};
            let mut s = std::net::TcpStream::connect(&addr).unwrap();
            write!(s, "GET /scenario HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
            let mut buf = String::new();
            s.read_to_string(&mut buf).unwrap();
            buf
        }
    })
    .await
    .unwrap();
    assert!(body.starts_with("HTTP/1.1 200"));
    let json = body.split("\r\n\r\n").nth(1).unwrap();
    let hello: Value = serde_json::from_str(json).unwrap();
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["scenario"]["goals"].as_array().unwrap().len(), 12);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws?seed=8")).await.unwrap();
    let hello = next_json(&mut ws).await;
    assert_eq!(hello["type"], "hello");
    let first = next_json(&mut ws).await;
    assert_eq!(first["type"], "state");
    assert_eq!(first["k"], 0);

    send(&mut ws, r#"{"type":"set_rate","hz":100}"#).await;
    let mut k = 0;
    for _ in 0..5 {
        let st = next_json(&mut ws).await;
        assert_eq!(st["type"], "state");
        let kk = st["k"].as_u64().unwrap();
        assert_eq!(kk, k + 1);
        k = kk;
    }

    send(&mut ws, r#"{"type":"set_goal","goal":3}"#).await;
    // states already in flight still carry the old goal
    let mut seen = 0;
    while next_json(&mut ws).await["true_goal"] != 3 {
        seen += 1;
        assert!(seen < 500, "goal never changed");
    }
    for _ in 0..3 {
        assert_eq!(next_json(&mut ws).await["true_goal"], 3);
    }

    send(&mut ws, r#"{"type":"set_goal","goal":42}"#).await;
    let mut saw_error = false;
    for _ in 0..500 {
        let ev = next_json(&mut ws).await;
        if ev["type"] == "error" {
            assert!(ev["detail"].as_str().unwrap().contains("42"));
            saw_error = true;
            break;
        }
    }
    assert!(saw_error);

    send(&mut ws, r#"{"type":"pause"}"#).await;
    // drain anything already in flight, then expect silence
    let mut last_k = 0;
    while let Ok(Some(Ok(Message::Text(t)))) = tokio::time::timeout(Duration::from_millis(300), ws.next()).await {
        let v: Value = serde_json::from_str(t.as_str()).unwrap();
        last_k = v["k"].as_u64().unwrap_or(last_k);
    }
    let quiet = tokio::time::timeout(Duration::from_millis(500), ws.next()).await;
    assert!(quiet.is_err(), "paused session kept streaming");

    send(&mut ws, r#"{"type":"step"}"#).await;
    let st = next_json(&mut ws).await;
    assert_eq!(st["k"].as_u64().unwrap(), last_k + 1);
    assert_eq!(st["paused"], true);

    send(&mut ws, r#"{"type":"reset","scenario":"case2"}"#).await;
    assert_eq!(next_json(&mut ws).await["type"], "hello");
    let st = next_json(&mut ws).await;
    assert_eq!(st["k"], 0);
    assert_eq!(st["true_goal"], 10);

    ws.close(None).await.unwrap();
}
