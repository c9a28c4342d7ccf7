use std::time::Duration;

use serde_json::{json, Value};
use tokio_stream::StreamExt;

use reflow_cli::server::{router, AppState};
use reflow_core::engine::EventRecord;
use reflow_core::fixtures::{RESCUE_GRID, RESCUE_GRID_DIVERGENT, RESCUE_GRID_UNSOLVABLE};
use reflow_core::log::{read_log, replay};
use reflow_core::scenario::parse_scenario;

struct Server {
    base: String,
    http: reqwest::Client,
}

impl Server {
    async fn start(log_dir: Option<std::path::PathBuf>) -> Server {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router(AppState::new(log_dir))).await.unwrap() });
        Server {
            base: format!("http://{addr}"),
            http: reqwest::Client::new(),
        }
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn ok(&self, path: &str, body: Value) -> Value {
        let (status, v) = self.post(path, body).await;
        assert_eq!(status, 200, "{path}: {v}");
        v
    }
}

#[tokio::test]
async fn commands_need_a_loaded_scenario() {
    let s = Server::start(None).await;
    let (status, body) = s.get("/state").await;
    assert_eq!(status, 409);
    assert_eq!(body["code"], "NO_SCENARIO");
    let (status, body) = s.post("/load-scenario", json!({ "scenario": "seed 1;\nprocess { fly(a) }" })).await;
    assert_eq!(status, 422);
    assert_eq!(body["code"], "UNKNOWN_TASK");
}

#[tokio::test]
async fn divergent_session_repairs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let s = Server::start(Some(dir.path().to_path_buf())).await;
    let ack = s.ok("/load-scenario", json!({ "scenario": RESCUE_GRID_DIVERGENT })).await;
    assert_eq!(ack, json!({ "sequence": 0, "mode": "RUNNING" }));

    let (_, enabled) = s.get("/enabled-tasks").await;
    assert_eq!(enabled, json!([{ "task": "move", "args": ["rbt1", "loc_0_0", "loc_0_1"] }]));
    assert_eq!(s.ok("/assign", json!({ "call": "move(rbt1, loc_0_0, loc_0_1)" })).await["sequence"], 1);
    assert_eq!(s.ok("/start", json!({ "item": 0 })).await["sequence"], 2);
    // the script fails the move; planning and the splice follow at once
    assert_eq!(s.ok("/finish", json!({ "item": 0 })).await["sequence"], 3);
    let (_, diff) = s.get("/realities-diff").await;
    assert_eq!(diff, json!([]));
    let (_, log) = s.get("/log?from=3").await;
    let kinds: Vec<&str> = log.as_array().unwrap().iter().map(|r| r["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["FINISH", "ADAPT_BEGIN", "ADAPT_SPLICE"]);

    // drive the spliced move and the rest by hand
    let mut item = 1;
    loop {
        let (_, enabled) = s.get("/enabled-tasks").await;
        let Some(call) = enabled.as_array().unwrap().first().cloned() else { break };
        s.ok("/assign", json!({ "call": call })).await;
        s.ok("/start", json!({ "item": item })).await;
        s.ok("/finish", json!({ "item": item })).await;
        item += 1;
    }
    let (_, state) = s.get("/state").await;
    assert_eq!(state["mode"], "COMPLETED");
    assert_eq!(state["adaptations"], 1);

    // the file written by the server replays to the live hash
    let def = parse_scenario(RESCUE_GRID_DIVERGENT).unwrap();
    let records = read_log(dir.path().join("run-1.cpplog")).unwrap();
    assert_eq!(records.len() as u64, state["log_length"].as_u64().unwrap());
    let engine = replay(&def, &records).unwrap();
    assert_eq!(engine.last_hash(), state["state_hash"].as_str());
}

#[tokio::test]
async fn explicit_outcomes_and_exogenous_events() {
    let s = Server::start(None).await;
    s.ok("/load-scenario", json!({ "scenario": RESCUE_GRID, "monitor": "LAZY" })).await;
    s.ok("/assign", json!({ "call": { "task": "move", "args": ["rbt1", "loc_0_0", "loc_0_1"] } })).await;
    s.ok("/start", json!({ "item": 0 })).await;
    let bad = s
        .post("/finish", json!({ "item": 0, "observed": [{ "fluent": "nope", "args": [], "value": "x" }] }))
        .await;
    assert_eq!(bad.1["code"], "TYPE_MISMATCH", "{}", bad.1);
    let ack = s
        .ok(
            "/finish",
            json!({ "item": 0, "observed": [{ "fluent": "at", "args": ["rbt1"], "value": "loc_0_1" }] }),
        )
        .await;
    assert_eq!(ack["sequence"], 3);
    let ack = s.ok("/inject-event", json!({ "event": "photolost", "args": ["loc_0_0"] })).await;
    assert_eq!(ack["sequence"], 4);
    let (status, body) = s.post("/inject-event", json!({ "event": "meteor" })).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("UNKNOWN_EVENT")));
    let (status, body) = s.post("/start", json!({ "item": 9 })).await;
    assert_eq!((status, body["code"].as_str()), (404, Some("UNKNOWN_WORK_ITEM")));
}

#[tokio::test]
async fn approval_gate_and_operator_commands() {
    let s = Server::start(None).await;
    let text = format!("approval on;\n{RESCUE_GRID_DIVERGENT}");
    s.ok("/load-scenario", json!({ "scenario": text })).await;
    s.ok("/assign", json!({ "call": "move(rbt1, loc_0_0, loc_0_1)" })).await;
    s.ok("/start", json!({ "item": 0 })).await;
    s.ok("/finish", json!({ "item": 0 })).await;
    let (_, state) = s.get("/state").await;
    assert_eq!(state["mode"], "ADAPTING");
    assert_eq!(state["pending_plan"]["plan"][0]["task"], "move");
    assert_eq!(state["pending_plan"]["trace"].as_array().unwrap().len(), 2);
    let (_, diff) = s.get("/realities-diff").await;
    assert_eq!(diff[0]["instance"], json!({ "fluent": "at", "args": ["rbt1"] }));
    assert_eq!(diff[0]["exp"], "loc_0_1");
    assert_eq!(diff[0]["phy"], "loc_0_0");

    let ack = s.ok("/reject-plan", json!({})).await;
    assert_eq!(ack["mode"], "MANUAL");
    let (status, body) = s.post("/assign", json!({ "call": "move(rbt1, loc_0_0, loc_0_1)" })).await;
    assert_eq!((status, body["code"].as_str()), (409, Some("MODE_ERROR")));
    s.ok("/manual/replace-remainder", json!({ "process": "seq { move(rbt1, loc_0_0, loc_0_1) takephoto(rbt1, loc_0_1) }" }))
        .await;
    let (_, state) = s.get("/state").await;
    let printed = state["remainder"].as_str().unwrap().split_whitespace().collect::<Vec<_>>().join(" ");
    assert_eq!(printed, "seq { move(rbt1, loc_0_0, loc_0_1) takephoto(rbt1, loc_0_1) }");
    let ack = s.ok("/abort", json!({})).await;
    assert_eq!(ack["mode"], "ABORTED");
}

#[tokio::test]
async fn unsolvable_then_force_align() {
    let s = Server::start(None).await;
    let ack = s.ok("/load-scenario", json!({ "scenario": RESCUE_GRID_UNSOLVABLE, "auto": true })).await;
    assert_eq!(ack["mode"], "MANUAL");
    let (_, state) = s.get("/state").await;
    assert_eq!(state["last_failure"], "UNSOLVABLE");
    let ack = s.ok("/manual/force-align", json!({})).await;
    // auto mode resumes after the operator command
    assert_eq!(ack["mode"], "COMPLETED");
}

async fn next_record<B: AsRef<[u8]>>(
    stream: &mut (impl tokio_stream::Stream<Item = reqwest::Result<B>> + Unpin),
    buf: &mut String,
) -> EventRecord {
    loop {
        if let Some(end) = buf.find("\n\n") {
            let frame: String = buf.drain(..end + 2).collect();
            if let Some(data) = frame.lines().find_map(|l| l.strip_prefix("data:")) {
                return serde_json::from_str(data.trim()).unwrap();
            }
            continue;
        }
        let chunk = tokio::time::timeout(Duration::from_secs(5), stream.next())
            .await
            .expect("push channel stalled")
            .unwrap()
            .unwrap();
        buf.push_str(std::str::from_utf8(chunk.as_ref()).unwrap());
    }
}

#[tokio::test]
async fn push_channel_streams_every_record() {
    let s = Server::start(None).await;
    s.ok("/load-scenario", json!({ "scenario": RESCUE_GRID })).await;
    s.ok("/assign", json!({ "call": "move(rbt1, loc_0_0, loc_0_1)" })).await;

    let resp = s.http.get(format!("{}/events?from=0", s.base)).send().await.unwrap();
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut stream = resp.bytes_stream();
    let mut buf = String::new();
    // backlog first, then live records in order
    s.ok("/start", json!({ "item": 0 })).await;
    s.ok("/finish", json!({ "item": 0 })).await;
    let mut seen = Vec::new();
    for _ in 0..4 {
        seen.push(next_record(&mut stream, &mut buf).await);
    }
    let kinds: Vec<&str> = seen.iter().map(|r| r.event.kind()).collect();
    assert_eq!(kinds, ["GENESIS", "ASSIGN", "START", "FINISH"]);
    assert_eq!(seen.iter().map(|r| r.sequence).collect::<Vec<_>>(), [0, 1, 2, 3]);
    let (_, log) = s.get("/log").await;
    let logged: Vec<EventRecord> = serde_json::from_value(log).unwrap();
    assert_eq!(logged, seen);
}
