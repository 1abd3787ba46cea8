//! Per-session environment: named variables plus the result history that
//! pronouns refer to.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

/// Words that refer back to the most recent result.
pub const PRONOUNS: [&str; 5] = ["that", "this", "those", "these", "it"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("'{0}' is not a valid variable name")]
    InvalidName(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    Named(String),
    Pronoun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub turn: usize,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    bindings: IndexMap<String, Value>,
    history: Vec<HistoryEntry>,
}

pub fn is_pronoun(text: &str) -> bool {
    let t = text.trim();
    PRONOUNS.iter().any(|p| t.eq_ignore_ascii_case(p))
}

/// Lowercases a user phrase and joins its words with underscores:
/// "Dogmatic Posts" becomes `dogmatic_posts`.
pub fn normalize_name(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, value: Value) -> Result<(), EnvError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(EnvError::InvalidName(name.to_string()));
        }
        // a rebound name keeps its original position
        self.bindings.insert(name.to_string(), value);
        Ok(())
    }

    pub fn lookup(&self, reference: &Reference) -> Option<&Value> {
        match reference {
            Reference::Named(name) => self.bindings.get(name),
            Reference::Pronoun => self.history.last().map(|e| &e.value),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    /// Appends a result and returns its history index.
    pub fn push_history(&mut self, turn: usize, value: Value) -> usize {
        self.history.push(HistoryEntry { turn, value });
        self.history.len() - 1
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn last_index(&self) -> Option<usize> {
        self.history.len().checked_sub(1)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }
}
