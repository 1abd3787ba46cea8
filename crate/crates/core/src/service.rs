//! Session registry and the versioned wire protocol.
//!
//! Every frame is a JSON object with a `version` and a `type`. A client
//! frame that names a session gets exactly one server frame back; frames
//! that fail to parse get an `ErrorMsg`.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::engine::{Engine, Hint};
use crate::session::{AgentResponse, EnvVar, PendingAsk, Session};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientMessage {
    CreateSession,
    UserMessage { session: String, text: String },
    HintQuery { session: String, partial_text: String },
    SelectOption { session: String, label: String },
    ExportScript { session: String },
    ListEnv { session: String },
}

impl ClientMessage {
    pub fn session(&self) -> Option<&str> {
        match self {
            ClientMessage::CreateSession => None,
            ClientMessage::UserMessage { session, .. }
            | ClientMessage::HintQuery { session, .. }
            | ClientMessage::SelectOption { session, .. }
            | ClientMessage::ExportScript { session }
            | ClientMessage::ListEnv { session } => Some(session),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    UnknownSession,
    MalformedFrame,
    VersionMismatch,
    ExportFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerMessage {
    SessionCreated {
        session: String,
    },
    AgentTurn {
        responses: Vec<AgentResponse>,
    },
    Hints {
        ranked: Vec<Hint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pending: Option<PendingAsk>,
    },
    EnvSnapshot {
        vars: Vec<EnvVar>,
    },
    Script {
        text: String,
    },
    ErrorMsg {
        code: ErrorCode,
        text: String,
    },
}

impl ServerMessage {
    fn error(code: ErrorCode, text: impl Into<String>) -> ServerMessage {
        ServerMessage::ErrorMsg {
            code,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame<M> {
    pub version: u32,
    #[serde(flatten)]
    pub body: M,
}

impl<M> Frame<M> {
    pub fn new(body: M) -> Frame<M> {
        Frame {
            version: PROTOCOL_VERSION,
            body,
        }
    }
}

struct Entry {
    session: Session,
    last_used: Instant,
}

/// All live sessions over one shared engine.
pub struct Service {
    engine: Arc<Engine>,
    seed: u64,
    idle_timeout: Duration,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl Service {
    pub fn new(engine: Arc<Engine>, seed: u64, idle_timeout: Duration) -> Service {
        Service {
            engine,
            seed,
            idle_timeout,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().len()
    }

    pub fn create_session(&self) -> String {
        let id = Uuid::new_v4().to_string();
        let entry = Entry {
            session: Session::new(self.engine.clone(), self.seed),
            last_used: Instant::now(),
        };
        self.sessions.lock().insert(id.clone(), Arc::new(Mutex::new(entry)));
        id
    }

    /// Runs `f` on one session. The session lock serializes its messages;
    /// the registry lock is released first so other sessions proceed.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> T) -> Option<T> {
        let entry = self.sessions.lock().get(id).cloned()?;
        let mut guard = entry.lock();
        guard.last_used = Instant::now();
        Some(f(&mut guard.session))
    }

    /// Drops sessions idle longer than the timeout as of `now`.
    pub fn evict_idle_at(&self, now: Instant) -> usize {
        let mut map = self.sessions.lock();
        let before = map.len();
        map.retain(|_, e| match e.try_lock() {
            Some(g) => now.saturating_duration_since(g.last_used) < self.idle_timeout,
            // busy sessions are not idle
            None => true,
        });
        before - map.len()
    }

    pub fn evict_idle(&self) -> usize {
        self.evict_idle_at(Instant::now())
    }

    pub fn handle(&self, msg: ClientMessage) -> ServerMessage {
        let unknown = |id: &str| ServerMessage::error(ErrorCode::UnknownSession, format!("unknown session '{id}'"));
        match msg {
            ClientMessage::CreateSession => ServerMessage::SessionCreated {
                session: self.create_session(),
            },
            ClientMessage::UserMessage { session, text } | ClientMessage::SelectOption { session, label: text } => self
                .with_session(&session, |s| ServerMessage::AgentTurn {
                    responses: s.handle_input(&text),
                })
                .unwrap_or_else(|| unknown(&session)),
            ClientMessage::HintQuery { session, partial_text } => self
                .with_session(&session, |s| {
                    let h = s.hints(&partial_text);
                    ServerMessage::Hints {
                        ranked: h.ranked,
                        pending: h.pending,
                    }
                })
                .unwrap_or_else(|| unknown(&session)),
            ClientMessage::ExportScript { session } => self
                .with_session(&session, |s| match s.export_script() {
                    Ok(text) => ServerMessage::Script { text },
                    Err(e) => ServerMessage::error(ErrorCode::ExportFailed, e.to_string()),
                })
                .unwrap_or_else(|| unknown(&session)),
            ClientMessage::ListEnv { session } => self
                .with_session(&session, |s| ServerMessage::EnvSnapshot { vars: s.env_snapshot() })
                .unwrap_or_else(|| unknown(&session)),
        }
    }

    /// One client frame in, one server frame out.
    pub fn handle_frame(&self, raw: &str) -> Frame<ServerMessage> {
        let value: serde_json::Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(e) => return Frame::new(ServerMessage::error(ErrorCode::MalformedFrame, e.to_string())),
        };
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
            Some(v) => {
                return Frame::new(ServerMessage::error(
                    ErrorCode::VersionMismatch,
                    format!("protocol version {v} is not supported; this server speaks {PROTOCOL_VERSION}"),
                ))
            }
            None => return Frame::new(ServerMessage::error(ErrorCode::MalformedFrame, "missing version")),
        }
        match serde_json::from_value::<Frame<ClientMessage>>(value) {
            Ok(f) => Frame::new(self.handle(f.body)),
            Err(e) => Frame::new(ServerMessage::error(ErrorCode::MalformedFrame, e.to_string())),
        }
    }

    /// `handle_frame` on text, returning text.
    pub fn handle_text(&self, raw: &str) -> String {
        serde_json::to_string(&self.handle_frame(raw)).expect("server frames serialize")
    }
}
