//! HTTP and WebSocket front end for [`Service`].
//!
//! Every body, in or out, is a protocol frame. REST routes fill in the
//! `type` and `session` fields from the path, so their request bodies only
//! carry the remaining fields.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::{json, Value as Json};

use colloquy_core::service::{ErrorCode, Frame, ServerMessage, Service, PROTOCOL_VERSION};

type Shared = Arc<Service>;

fn status_of(msg: &ServerMessage) -> StatusCode {
    match msg {
        ServerMessage::ErrorMsg { code, .. } => match code {
            ErrorCode::UnknownSession => StatusCode::NOT_FOUND,
            ErrorCode::MalformedFrame | ErrorCode::VersionMismatch => StatusCode::BAD_REQUEST,
            ErrorCode::ExportFailed => StatusCode::INTERNAL_SERVER_ERROR,
        },
        _ => StatusCode::OK,
    }
}

fn reply(frame: Frame<ServerMessage>) -> Response {
    let status = status_of(&frame.body);
    let body = serde_json::to_string(&frame).expect("server frames serialize");
    (status, [("content-type", "application/json")], body).into_response()
}

/// Builds a client frame from a route and an optional JSON body.
fn route_frame(kind: &str, session: Option<&str>, body: &str) -> String {
    let mut obj = if body.trim().is_empty() {
        json!({})
    } else {
        match serde_json::from_str::<Json>(body) {
            Ok(v @ Json::Object(_)) => v,
            // passed through so the service reports it
            _ => return body.to_string(),
        }
    };
    let map = obj.as_object_mut().expect("object");
    map.entry("version").or_insert(json!(PROTOCOL_VERSION));
    map.insert("type".into(), json!(kind));
    if let Some(s) = session {
        map.insert("session".into(), json!(s));
    }
    obj.to_string()
}

async fn run(svc: Shared, raw: String) -> Response {
    let frame = tokio::task::spawn_blocking(move || svc.handle_frame(&raw))
        .await
        .expect("service does not panic");
    reply(frame)
}

async fn health(State(svc): State<Shared>) -> Response {
    let body = json!({"status": "ok", "version": PROTOCOL_VERSION, "sessions": svc.session_count()});
    (StatusCode::OK, axum::Json(body)).into_response()
}

async fn create(State(svc): State<Shared>, body: String) -> Response {
    run(svc, route_frame("CreateSession", None, &body)).await
}

async fn message(State(svc): State<Shared>, Path(id): Path<String>, body: String) -> Response {
    run(svc, route_frame("UserMessage", Some(&id), &body)).await
}

async fn hints(State(svc): State<Shared>, Path(id): Path<String>, body: String) -> Response {
    run(svc, route_frame("HintQuery", Some(&id), &body)).await
}

async fn select(State(svc): State<Shared>, Path(id): Path<String>, body: String) -> Response {
    run(svc, route_frame("SelectOption", Some(&id), &body)).await
}

async fn env(State(svc): State<Shared>, Path(id): Path<String>) -> Response {
    run(svc, route_frame("ListEnv", Some(&id), "")).await
}

async fn export(State(svc): State<Shared>, Path(id): Path<String>) -> Response {
    run(svc, route_frame("ExportScript", Some(&id), "")).await
}

async fn frame(State(svc): State<Shared>, body: String) -> Response {
    run(svc, body).await
}

async fn ws(State(svc): State<Shared>, upgrade: WebSocketUpgrade) -> Response {
    upgrade.on_upgrade(move |socket| chat(svc, socket))
}

/// One server frame per client text frame; binary frames are malformed.
async fn chat(svc: Shared, mut socket: WebSocket) {
    while let Some(Ok(msg)) = socket.recv().await {
        let raw = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(_) => String::new(),
            Message::Close(_) => break,
            _ => continue,
        };
        let svc = svc.clone();
        let out = tokio::task::spawn_blocking(move || svc.handle_text(&raw))
            .await
            .expect("service does not panic");
        if socket.send(Message::Text(out.into())).await.is_err() {
            break;
        }
    }
}

pub fn router(svc: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}/messages", post(message))
        .route("/v1/sessions/{id}/hints", post(hints))
        .route("/v1/sessions/{id}/select", post(select))
        .route("/v1/sessions/{id}/env", get(env))
        .route("/v1/sessions/{id}/export", get(export))
        .route("/v1/frame", post(frame))
        .route("/v1/ws", get(ws))
        .with_state(svc)
}

/// Drops idle sessions on a fixed cadence.
pub fn spawn_evictor(svc: Shared, idle: Duration) -> tokio::task::JoinHandle<()> {
    let every = (idle / 2).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = svc.evict_idle();
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    })
}

pub async fn serve(svc: Shared, listen: &str, idle: Duration) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    eprintln!("serving on http://{}", listener.local_addr()?);
    let evictor = spawn_evictor(svc.clone(), idle);
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    evictor.abort();
    Ok(())
}
