//! Conversation AST and script export.
//!
//! Top-level commands become statements, nested commands become nested
//! calls, and references to earlier results become either variable names or
//! generated temporaries `_r{k}`. The exported script lists each command's
//! source once, in first-use order, followed by one line per statement.

pub mod eval;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{CommandKind, CommandRegistry, CommandSpec};
use crate::value::{fmt_real, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodegenError {
    #[error("'{command}' takes {expected} arguments, got {found}")]
    ArityMismatch {
        command: String,
        expected: usize,
        found: usize,
    },
    #[error("no source snippet for command '{0}'")]
    MissingSnippet(String),
    #[error("history entry {0} has no recorded origin")]
    DanglingHistory(usize),
    #[error("unknown command '{0}'")]
    UnknownCommand(String),
    #[error("script error on line {line}: {reason}")]
    Script { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArgSource {
    Literal {
        value: Value,
    },
    VarRef {
        name: String,
    },
    /// Index into the session history.
    HistoryRef {
        index: usize,
    },
    Nested {
        call: CallNode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallNode {
    pub command: String,
    pub args: Vec<ArgSource>,
    /// Seed recorded for commands that draw random numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum Stmt {
    Assign { name: String, source: ArgSource },
    Expr { call: CallNode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub stmt: Stmt,
    /// History index of the statement's result.
    pub history: usize,
}

/// What produced a history entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryOrigin {
    Statement { index: usize },
    Nested { call: CallNode },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConversationAst {
    /// Data bound before the conversation started: name and CSV path.
    pub preloads: Vec<(String, String)>,
    pub statements: Vec<Statement>,
    /// One entry per history index.
    pub history: Vec<HistoryOrigin>,
}

/// Checks arity and builds a call node.
pub fn build_ast_node(cmd: &CommandSpec, sources: Vec<ArgSource>, seed: Option<u64>) -> Result<CallNode, CodegenError> {
    if sources.len() != cmd.args.len() {
        return Err(CodegenError::ArityMismatch {
            command: cmd.id.clone(),
            expected: cmd.args.len(),
            found: sources.len(),
        });
    }
    Ok(CallNode {
        command: cmd.id.clone(),
        args: sources,
        seed: if cmd.kind == CommandKind::Random { seed } else { None },
    })
}

impl ConversationAst {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a completed nested call; returns its history index.
    pub fn record_nested(&mut self, call: CallNode) -> usize {
        self.history.push(HistoryOrigin::Nested { call });
        self.history.len() - 1
    }

    /// Appends a top-level statement; returns its history index.
    pub fn record_statement(&mut self, stmt: Stmt) -> usize {
        let history = self.history.len();
        self.history.push(HistoryOrigin::Statement {
            index: self.statements.len(),
        });
        self.statements.push(Statement { stmt, history });
        history
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("AST serializes")
    }
}

/// Turns definitions and statement lines into the final text.
pub trait Renderer {
    fn render(&self, defs: &[String], lines: &[String]) -> String;
}

/// Python-like output: definitions separated by blank lines, then the
/// statements.
pub struct ReferenceRenderer;

impl Renderer for ReferenceRenderer {
    fn render(&self, defs: &[String], lines: &[String]) -> String {
        let mut out = String::new();
        for d in defs {
            out.push_str(d);
            out.push_str("\n\n");
        }
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

pub fn render_literal(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Real(r) => fmt_real(*r),
        Value::Text(s) => serde_json::to_string(s).expect("strings serialize"),
        Value::Array(a) => format!(
            "[{}]",
            a.as_slice().iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(", ")
        ),
        Value::Unit => "None".to_string(),
        other => serde_json::to_string(other).expect("values serialize"),
    }
}

pub fn temp_name(history: usize) -> String {
    format!("_r{history}")
}

struct Emitter<'a> {
    ast: &'a ConversationAst,
    /// Reference count per history index.
    referenced: HashMap<usize, usize>,
}

impl Emitter<'_> {
    fn source(&self, s: &ArgSource) -> Result<String, CodegenError> {
        match s {
            ArgSource::Literal { value } => Ok(render_literal(value)),
            ArgSource::VarRef { name } => Ok(name.clone()),
            ArgSource::HistoryRef { index } => match self.ast.history.get(*index) {
                Some(HistoryOrigin::Statement { .. }) => Ok(temp_name(*index)),
                Some(HistoryOrigin::Nested { call }) => self.call(call),
                None => Err(CodegenError::DanglingHistory(*index)),
            },
            ArgSource::Nested { call } => self.call(call),
        }
    }

    fn call(&self, c: &CallNode) -> Result<String, CodegenError> {
        let mut args = c.args.iter().map(|a| self.source(a)).collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = c.seed {
            args.push(format!("seed={seed}"));
        }
        Ok(format!("{}({})", c.command, args.join(", ")))
    }
}

/// Commands in pre-order of first use, following history references into
/// nested origins.
fn commands_used(ast: &ConversationAst) -> Vec<String> {
    fn visit_source(ast: &ConversationAst, s: &ArgSource, seen: &mut Vec<String>) {
        match s {
            ArgSource::Nested { call } => visit_call(ast, call, seen),
            ArgSource::HistoryRef { index } => {
                if let Some(HistoryOrigin::Nested { call }) = ast.history.get(*index) {
                    visit_call(ast, call, seen);
                }
            }
            _ => {}
        }
    }
    fn visit_call(ast: &ConversationAst, c: &CallNode, seen: &mut Vec<String>) {
        if !seen.contains(&c.command) {
            seen.push(c.command.clone());
        }
        for a in &c.args {
            visit_source(ast, a, seen);
        }
    }
    let mut seen = Vec::new();
    if !ast.preloads.is_empty() {
        seen.push("load_csv".to_string());
    }
    for st in &ast.statements {
        match &st.stmt {
            Stmt::Expr { call } => visit_call(ast, call, &mut seen),
            Stmt::Assign { source, .. } => visit_source(ast, source, &mut seen),
        }
    }
    seen
}

/// Compiles the conversation into a script.
pub fn export_script(
    ast: &ConversationAst,
    registry: &CommandRegistry,
    renderer: &dyn Renderer,
) -> Result<String, CodegenError> {
    let mut defs = Vec::new();
    for id in commands_used(ast) {
        let snippet = registry
            .get(&id)
            .map(|c| c.source_snippet.clone())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CodegenError::MissingSnippet(id.clone()))?;
        defs.push(snippet);
    }
    let mut referenced = HashMap::new();
    let mut mark = |s: &ArgSource| {
        if let ArgSource::HistoryRef { index } = s {
            *referenced.entry(*index).or_insert(0) += 1;
        }
    };
    fn walk(s: &ArgSource, f: &mut dyn FnMut(&ArgSource)) {
        f(s);
        if let ArgSource::Nested { call } = s {
            for a in &call.args {
                walk(a, f);
            }
        }
    }
    for origin in &ast.history {
        if let HistoryOrigin::Nested { call } = origin {
            for a in &call.args {
                walk(a, &mut mark);
            }
        }
    }
    for st in &ast.statements {
        match &st.stmt {
            Stmt::Expr { call } => call.args.iter().for_each(|a| walk(a, &mut mark)),
            Stmt::Assign { source, .. } => walk(source, &mut mark),
        }
    }
    let em = Emitter { ast, referenced };
    let mut lines = Vec::new();
    for (name, path) in &ast.preloads {
        lines.push(format!(
            "{name} = load_csv({})",
            render_literal(&Value::Text(path.clone()))
        ));
    }
    let mut folded = false;
    for (i, st) in ast.statements.iter().enumerate() {
        if std::mem::take(&mut folded) {
            continue;
        }
        let uses = em.referenced.get(&st.history).copied().unwrap_or(0);
        match &st.stmt {
            Stmt::Expr { call } => {
                let text = em.call(call)?;
                // a result saved right away and used nowhere else is named directly
                let saved = match ast.statements.get(i + 1) {
                    Some(Statement {
                        stmt:
                            Stmt::Assign {
                                name,
                                source: ArgSource::HistoryRef { index },
                            },
                        history,
                    }) if *index == st.history && uses == 1 => Some((name, *history)),
                    _ => None,
                };
                if let Some((name, history)) = saved {
                    folded = true;
                    lines.push(format!("{name} = {text}"));
                    if em.referenced.contains_key(&history) {
                        lines.push(format!("{} = {name}", temp_name(history)));
                    }
                } else if uses > 0 {
                    lines.push(format!("{} = {text}", temp_name(st.history)));
                } else {
                    lines.push(text);
                }
            }
            Stmt::Assign { name, source } => {
                let text = em.source(source)?;
                if uses > 0 {
                    lines.push(format!("{} = {text}", temp_name(st.history)));
                    lines.push(format!("{name} = {}", temp_name(st.history)));
                } else {
                    lines.push(format!("{name} = {text}"));
                }
            }
        }
    }
    Ok(renderer.render(&defs, &lines))
}
