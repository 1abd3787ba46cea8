//! Application settings: a TOML file, then `COLLOQUY_*` environment
//! overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineConfig;

pub const ENV_PREFIX: &str = "COLLOQUY_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("bad config file: {0}")]
    Parse(String),
    #[error("bad value for {key}: '{value}'")]
    Override { key: String, value: String },
    #[error("unknown setting {0}")]
    UnknownKey(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub listen: String,
    pub seed: u64,
    /// Sessions idle this long are dropped.
    pub idle_timeout_secs: u64,
    /// Where the REPL writes SVG charts; none means text charts only.
    pub svg_dir: Option<PathBuf>,
    pub engine: EngineConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            listen: "127.0.0.1:7878".to_string(),
            seed: 0,
            idle_timeout_secs: 30 * 60,
            svg_dir: None,
            engine: EngineConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Override {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Override {
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (!value.trim().is_empty()).then(|| PathBuf::from(value.trim()))
}

impl AppConfig {
    pub fn from_toml(src: &str) -> Result<AppConfig, ConfigError> {
        toml::from_str(src).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        AppConfig::from_toml(&src)
    }

    /// Applies one override; `key` has the prefix already stripped.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = key.to_ascii_uppercase();
        let e = &mut self.engine;
        match k.as_str() {
            "LISTEN" => self.listen = value.trim().to_string(),
            "SEED" => self.seed = parse(&k, value)?,
            "IDLE_TIMEOUT_SECS" => self.idle_timeout_secs = parse(&k, value)?,
            "SVG_DIR" => self.svg_dir = path_opt(value),
            "DATA_DIR" => e.data_dir = PathBuf::from(value.trim()),
            "LEXICON" => e.lexicon = PathBuf::from(value.trim()),
            "ALPHA" => e.alpha = parse(&k, value)?,
            "AUTO_SINGLE_OPTION" => e.auto_single_option = parse_bool(&k, value)?,
            "DEPTH_CAP" => e.depth_cap = parse(&k, value)?,
            "LEARNING" => e.learning = parse_bool(&k, value)?,
            "TEMPLATES_PATH" => e.templates_path = path_opt(value),
            "EXAMPLES_PATH" => e.examples_path = path_opt(value),
            "SYNONYMS_PATH" => e.synonyms_path = path_opt(value),
            "L2" => e.hyperparams.l2 = parse(&k, value)?,
            "LR" => e.hyperparams.lr = parse(&k, value)?,
            "EPOCHS" => e.hyperparams.epochs = parse(&k, value)?,
            _ => return Err(ConfigError::UnknownKey(format!("{ENV_PREFIX}{k}"))),
        }
        Ok(())
    }

    /// Applies every `COLLOQUY_*` pair from `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (k, v) in vars {
            if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
                self.set(rest, &v)?;
            }
        }
        Ok(())
    }

    /// File (if any) plus the process environment.
    pub fn resolve(path: Option<&Path>) -> Result<AppConfig, ConfigError> {
        let mut cfg = match path {
            Some(p) => AppConfig::load(p)?,
            None => AppConfig::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env() {
        let mut c =
            AppConfig::from_toml("seed = 4\nlisten = \"0.0.0.0:9000\"\n[engine]\nalpha = 0.01\nlearning = false\n")
                .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.engine.alpha, 0.01);
        assert!(!c.engine.learning);
        assert_eq!(c.idle_timeout_secs, 1800);
        c.apply_env([
            ("COLLOQUY_SEED".to_string(), "9".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
            ("COLLOQUY_LEARNING".to_string(), "yes".to_string()),
        ])
        .unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.engine.learning);
    }

    #[test]
    fn bad_input() {
        assert!(matches!(AppConfig::from_toml("sed = 1"), Err(ConfigError::Parse(_))));
        let mut c = AppConfig::default();
        assert!(matches!(c.set("SEED", "x"), Err(ConfigError::Override { .. })));
        assert!(matches!(c.set("NOPE", "1"), Err(ConfigError::UnknownKey(_))));
    }
}
