//! Conversational command engine.

pub mod automata;
pub mod codegen;
pub mod command;
pub mod config;
pub mod engine;
pub mod env;
pub mod intent;
pub mod pack;
pub mod replay;
pub mod service;
pub mod session;
pub mod stats;
pub mod text;
pub mod types;
pub mod value;

pub use command::{CommandRegistry, CommandSpec};
pub use config::AppConfig;
pub use engine::{Engine, EngineConfig, EngineError};
pub use replay::{replay, ReplayReport, Transcript};
pub use service::{ClientMessage, Frame, ServerMessage, Service};
pub use session::{AgentResponse, Session};
pub use value::Value;
