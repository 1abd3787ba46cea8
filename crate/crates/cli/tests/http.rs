use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tower::ServiceExt;

use colloquy_cli::server::router;
use colloquy_core::engine::{Engine, EngineConfig};
use colloquy_core::service::Service;

fn service() -> Arc<Service> {
    let cfg = EngineConfig {
        data_dir: Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data"),
        learning: false,
        ..EngineConfig::default()
    };
    Arc::new(Service::new(
        Arc::new(Engine::with_pack(cfg).unwrap()),
        0,
        Duration::from_secs(60),
    ))
}

async fn call(svc: &Arc<Service>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let res = router(svc.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn raw(svc: &Arc<Service>, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method("POST")
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let res = router(svc.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn rest_conversation() {
    let svc = service();
    let (status, health) = call(&svc, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health, json!({"status": "ok", "version": 1, "sessions": 0}));

    let (status, created) = call(&svc, "POST", "/v1/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(created["type"], "SessionCreated");
    assert_eq!(created["version"], 1);
    let id = created["session"].as_str().unwrap().to_string();
    let base = format!("/v1/sessions/{id}");

    let (_, hints) = call(
        &svc,
        "POST",
        &format!("{base}/hints"),
        Some(json!({"partial_text": "quartiles"})),
    )
    .await;
    assert_eq!(hints["type"], "Hints");
    assert_eq!(hints["ranked"][0]["hint_text"], "compute quartiles for an {array}");

    for text in ["load dogmatism.csv", "save that as d"] {
        let (status, turn) = call(&svc, "POST", &format!("{base}/messages"), Some(json!({"text": text}))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(turn["type"], "AgentTurn");
    }
    let (_, turn) = call(
        &svc,
        "POST",
        &format!("{base}/messages"),
        Some(json!({"text": "find quartiles"})),
    )
    .await;
    assert_eq!(turn["responses"][0]["text"], "Sure, I can compute quartiles");
    assert_eq!(turn["responses"][1]["type"], "Ask");
    call(&svc, "POST", &format!("{base}/messages"), Some(json!({"text": "d"}))).await;
    let (_, turn) = call(&svc, "POST", &format!("{base}/select"), Some(json!({"label": "yes"}))).await;
    assert_eq!(
        turn["responses"].as_array().unwrap().last().unwrap()["options"],
        json!(["score"])
    );
    let (_, turn) = call(&svc, "POST", &format!("{base}/select"), Some(json!({"label": "score"}))).await;
    assert_eq!(
        turn["responses"].as_array().unwrap().last().unwrap()["type"],
        "ShowValue"
    );

    let (_, env) = call(&svc, "GET", &format!("{base}/env"), None).await;
    assert_eq!(env["type"], "EnvSnapshot");
    assert_eq!(env["vars"][0]["name"], "d");
    assert_eq!(env["vars"][0]["type"], "Collection");

    let (_, script) = call(&svc, "GET", &format!("{base}/export"), None).await;
    assert_eq!(script["type"], "Script");
    assert!(script["text"]
        .as_str()
        .unwrap()
        .trim_end()
        .ends_with("quartiles(select_column(\"score\", d))"));

    let (_, health) = call(&svc, "GET", "/health", None).await;
    assert_eq!(health["sessions"], 1);
}

#[tokio::test]
async fn errors_keep_the_frame_shape() {
    let svc = service();
    let (status, err) = call(&svc, "GET", "/v1/sessions/nope/env", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["type"], "ErrorMsg");
    assert_eq!(err["code"], "UnknownSession");

    let (_, created) = call(&svc, "POST", "/v1/sessions", None).await;
    let id = created["session"].as_str().unwrap();
    for body in ["{", "[1, 2]", "{\"text\": 3}", "{}"] {
        let (status, err) = raw(&svc, &format!("/v1/sessions/{id}/messages"), body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(err["code"], "MalformedFrame", "{body}");
    }
    let (status, err) = raw(&svc, "/v1/frame", "{\"version\": 7, \"type\": \"CreateSession\"}").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "VersionMismatch");
    let (status, ok) = raw(&svc, "/v1/frame", "{\"version\": 1, \"type\": \"CreateSession\"}").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ok["type"], "SessionCreated");
}

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn ask(ws: &mut Socket, frame: String) -> Value {
    ws.send(tokio_tungstenite::tungstenite::Message::text(frame))
        .await
        .unwrap();
    let msg = ws.next().await.unwrap().unwrap();
    serde_json::from_str(msg.to_text().unwrap()).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_answers_every_frame() {
    let svc = service();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(svc)).await.unwrap() });
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/v1/ws"))
        .await
        .unwrap();

    let created = ask(&mut ws, json!({"version": 1, "type": "CreateSession"}).to_string()).await;
    let id = created["session"].as_str().unwrap().to_string();
    let turn = ask(
        &mut ws,
        json!({"version": 1, "type": "UserMessage", "session": id, "text": "add 2 and 3"}).to_string(),
    )
    .await;
    assert_eq!(turn["responses"][0]["value"], json!({"type": "Real", "value": 5.0}));
    let bad = ask(&mut ws, "not json".to_string()).await;
    assert_eq!(bad["code"], "MalformedFrame");
    let hints = ask(
        &mut ws,
        json!({"version": 1, "type": "HintQuery", "session": id, "partial_text": ""}).to_string(),
    )
    .await;
    assert_eq!(hints["type"], "Hints");
    assert!(hints["ranked"].as_array().unwrap().len() >= 25);
}
