#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use depkg::agents::{BackendError, BackendReply, ChatMessage, LlmBackend, Script, ToolCall, ToolSpec};
use depkg::config::Config;
use depkg::fixtures::FixtureServer;
use depkg::service::{self, BackendFactory, ServiceState};
use depkg::Ecosystem;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn script(name: &str) -> Script {
    Script::from_path(&manifest_path(&format!("fixtures/scripts/{name}"))).expect("script fixture")
}

/// Fixture server with the standard recordings plus a package whose
/// deps.dev lookup fails with HTTP 500.
pub fn fixture_server() -> FixtureServer {
    FixtureServer::builder()
        .standard()
        .depsdev_status(Ecosystem::PyPI, "broken", "1.0.0", 500)
        .start()
}

pub fn config_for(server: &FixtureServer) -> Config {
    let base = server.base_url();
    let pairs = BTreeMap::from([
        ("DEPSDEV_BASE_URL".to_string(), base.clone()),
        ("OSV_BASE_URL".to_string(), base),
        ("SEARCH_PROVIDER".to_string(), "stub".to_string()),
        ("SEARCH_FIXTURE_PATH".to_string(), manifest_path("fixtures/search.json").display().to_string()),
        ("HTTP_TIMEOUT_SECS".to_string(), "5".to_string()),
    ]);
    Config::from_pairs(&pairs).expect("test config")
}

pub fn scripted_factory(script: Script) -> BackendFactory {
    Arc::new(move |agent: &str| Box::new(script.backend(agent)) as Box<dyn LlmBackend>)
}

pub async fn send(app: &Router, method: &str, path: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut request = Request::builder().method(method).uri(path);
    if body.is_some() {
        request = request.header("content-type", "application/json");
    }
    let request = request.body(Body::from(body.unwrap_or("").to_string())).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|e| panic!("{method} {path}: body is not JSON ({e}): {}", String::from_utf8_lossy(&bytes)));
    (status, value)
}

pub const GOLDEN_FILE: &str = "tests/golden/service.json";

/// Replays the golden request sequence against a fresh service. With
/// `update` set the recorded responses are rewritten instead of compared.
/// Returns the number of exchanges checked.
pub async fn run_golden(update: bool) -> Result<usize, String> {
    let server = fixture_server();
    let state = ServiceState::new(config_for(&server), scripted_factory(script("density.json")));
    let app = service::router(state, false);

    let path = manifest_path(GOLDEN_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cases: Vec<Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    for case in cases.iter_mut() {
        let name = case["name"].as_str().unwrap_or("?").to_string();
        let method = case["request"]["method"].as_str().unwrap().to_string();
        let uri = case["request"]["path"].as_str().unwrap().to_string();
        let body = match (&case["request"]["body"], &case["request"]["raw_body"]) {
            (Value::Null, Value::String(raw)) => Some(raw.clone()),
            (Value::Null, _) => None,
            (v, _) => Some(v.to_string()),
        };
        let (status, value) = send(&app, &method, &uri, body.as_deref()).await;
        if update {
            case["response"] = json!({ "status": status.as_u16(), "body": value });
            continue;
        }
        let expected_status = case["response"]["status"].as_u64();
        if expected_status != Some(status.as_u16() as u64) {
            failures.push(format!("{name}: status {status}, expected {expected_status:?}"));
        } else if case["response"]["body"] != value {
            failures.push(format!(
                "{name}: body differs\n  expected {}\n  actual   {value}",
                case["response"]["body"]
            ));
        }
    }
    if update {
        std::fs::write(&path, serde_json::to_string_pretty(&cases).unwrap() + "\n").map_err(|e| e.to_string())?;
    }
    if failures.is_empty() {
        Ok(cases.len())
    } else {
        Err(failures.join("\n"))
    }
}

/// Assistant backend that blocks inside `respond` until released.
struct GateBackend {
    entered: mpsc::Sender<()>,
    release: Arc<Mutex<mpsc::Receiver<()>>>,
}

impl LlmBackend for GateBackend {
    fn respond(&mut self, _: &[ChatMessage], _: &[ToolSpec]) -> Result<BackendReply, BackendError> {
        let _ = self.entered.send(());
        self.release.lock().unwrap().recv().map_err(|e| BackendError::Http(e.to_string()))?;
        Ok(BackendReply::Tool(ToolCall::Done { answer: "released".into() }))
    }
}

/// A second message to a busy session is refused with 409 and the first
/// still completes. Returns the statuses observed in order: second message,
/// transcript while busy, first message, message after completion.
pub async fn single_flight() -> [StatusCode; 4] {
    let (entered_tx, entered_rx) = mpsc::channel();
    let (release_tx, release_rx) = mpsc::channel();
    let entered_tx = Mutex::new(entered_tx);
    let release_rx = Arc::new(Mutex::new(release_rx));
    let factory: BackendFactory = Arc::new(move |_agent: &str| {
        Box::new(GateBackend {
            entered: entered_tx.lock().unwrap().clone(),
            release: release_rx.clone(),
        }) as Box<dyn LlmBackend>
    });
    let state = ServiceState::new(Config::default(), factory);
    let app = service::router(state, false);
    let (status, _) = send(&app, "POST", "/api/sessions", Some("{}")).await;
    assert_eq!(status, StatusCode::CREATED);

    let first = {
        let app = app.clone();
        tokio::spawn(async move { send(&app, "POST", "/api/sessions/s1/messages", Some(r#"{"text": "first"}"#)).await })
    };
    let entered = tokio::task::spawn_blocking(move || {
        entered_rx.recv().unwrap();
        entered_rx
    })
    .await
    .unwrap();
    let (second, body) = send(&app, "POST", "/api/sessions/s1/messages", Some(r#"{"text": "second"}"#)).await;
    assert!(body["error"].as_str().unwrap().contains("already answering"));
    let (transcript, _) = send(&app, "GET", "/api/sessions/s1/transcript", None).await;
    release_tx.send(()).unwrap();
    let (first, body) = first.await.unwrap();
    assert_eq!(body["answer"], "released");
    release_tx.send(()).unwrap();
    let (third, _) = send(&app, "POST", "/api/sessions/s1/messages", Some(r#"{"text": "third"}"#)).await;
    drop(entered);
    [second, transcript, first, third]
}
