//! Shared fixtures for the benchmarks.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use colloquy_core::engine::{Engine, EngineConfig};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

/// The shipped pack with learning off, so repeated turns do not retrain.
pub fn engine() -> Arc<Engine> {
    let cfg = EngineConfig {
        data_dir: data_dir(),
        learning: false,
        ..EngineConfig::default()
    };
    Arc::new(Engine::with_pack(cfg).expect("pack builds"))
}
