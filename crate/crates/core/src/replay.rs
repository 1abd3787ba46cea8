//! Scripted conversations checked against a fresh session.
//!
//! A transcript is JSON lines of `{role, text, match}`. Agent lines after a
//! user line are the responses expected for that turn, in order.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Engine;
use crate::session::Session;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed transcript at line {line}: {reason}")]
    MalformedTranscript { line: usize, reason: String },
    #[error("could not read transcript: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    #[default]
    Exact,
    Regex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    pub role: Role,
    pub text: String,
    #[serde(default, rename = "match")]
    pub match_kind: MatchKind,
}

#[derive(Debug, Clone)]
pub enum Expect {
    Exact(String),
    Regex(Regex),
}

impl Expect {
    pub fn matches(&self, text: &str) -> bool {
        match self {
            Expect::Exact(s) => s == text,
            Expect::Regex(r) => r.is_match(text),
        }
    }

    fn describe(&self) -> String {
        match self {
            Expect::Exact(s) => format!("{s:?}"),
            Expect::Regex(r) => format!("/{}/", r.as_str()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Turn {
    pub user: String,
    pub expect: Vec<Expect>,
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub turns: Vec<Turn>,
}

impl Transcript {
    pub fn parse(src: &str) -> Result<Transcript, ReplayError> {
        let mut turns: Vec<Turn> = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: TranscriptLine = serde_json::from_str(raw).map_err(|e| ReplayError::MalformedTranscript {
                line,
                reason: e.to_string(),
            })?;
            match rec.role {
                Role::User => turns.push(Turn {
                    user: rec.text,
                    expect: Vec::new(),
                }),
                Role::Agent => {
                    let expect = match rec.match_kind {
                        MatchKind::Exact => Expect::Exact(rec.text),
                        // anchored so a pattern covers the whole response
                        MatchKind::Regex => {
                            Expect::Regex(Regex::new(&format!("^(?s:{})$", rec.text)).map_err(|e| {
                                ReplayError::MalformedTranscript {
                                    line,
                                    reason: e.to_string(),
                                }
                            })?)
                        }
                    };
                    turns
                        .last_mut()
                        .ok_or_else(|| ReplayError::MalformedTranscript {
                            line,
                            reason: "agent line before any user line".into(),
                        })?
                        .expect
                        .push(expect);
                }
            }
        }
        Ok(Transcript { turns })
    }

    pub fn load(path: &Path) -> Result<Transcript, ReplayError> {
        Transcript::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReport {
    pub index: usize,
    pub user: String,
    pub passed: bool,
    pub got: Vec<String>,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub turns: Vec<TurnReport>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.turns.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> usize {
        self.turns.iter().filter(|t| !t.passed).count()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.turns {
            writeln!(
                f,
                "turn {} {}: {}",
                t.index,
                if t.passed { "PASS" } else { "FAIL" },
                t.user
            )?;
            for p in &t.problems {
                writeln!(f, "    {p}")?;
            }
        }
        write!(
            f,
            "{} of {} turns passed",
            self.turns.len() - self.failures(),
            self.turns.len()
        )
    }
}

/// Feeds every user line to a fresh session and compares the responses.
/// A failing turn does not stop the replay.
pub fn replay(engine: Arc<Engine>, transcript: &Transcript, seed: u64) -> ReplayReport {
    let mut session = Session::new(engine, seed);
    let mut report = ReplayReport::default();
    for (i, turn) in transcript.turns.iter().enumerate() {
        let got: Vec<String> = session
            .handle_input(&turn.user)
            .iter()
            .map(|r| r.text().to_string())
            .collect();
        let mut problems = Vec::new();
        for (k, e) in turn.expect.iter().enumerate() {
            match got.get(k) {
                Some(g) if e.matches(g) => {}
                Some(g) => problems.push(format!("response {}: expected {}, got {g:?}", k + 1, e.describe())),
                None => problems.push(format!("response {}: expected {}, got nothing", k + 1, e.describe())),
            }
        }
        if got.len() > turn.expect.len() {
            problems.push(format!("expected {} responses, got {}", turn.expect.len(), got.len()));
        }
        report.turns.push(TurnReport {
            index: i + 1,
            user: turn.user.clone(),
            passed: problems.is_empty(),
            got,
            problems,
        });
    }
    report
}
