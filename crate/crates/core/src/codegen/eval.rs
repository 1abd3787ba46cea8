//! Reference evaluator for exported scripts.
//!
//! Reads the statement section of a script produced by the reference
//! renderer and runs each call through the command bodies of a registry.
//! Definition blocks (`def` plus indented lines) are skipped.

use std::collections::HashMap;

use super::CodegenError;
use crate::command::{CommandRegistry, ExecCtx};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Punct(char),
}

fn lex(line: &str, n: usize) -> Result<Vec<Tok>, CodegenError> {
    let err = |reason: String| CodegenError::Script { line: n, reason };
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '-' {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || matches!(chars[i], '.' | 'e' | 'E')
                    || (matches!(chars[i], '+' | '-') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            out.push(Tok::Num(chars[start..i].iter().collect()));
        } else if c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err(err("unterminated string".into()));
            }
            i += 1;
            let raw: String = chars[start..i].iter().collect();
            let s: String = serde_json::from_str(&raw).map_err(|e| err(e.to_string()))?;
            out.push(Tok::Str(s));
        } else if "()[],=".contains(c) {
            out.push(Tok::Punct(c));
            i += 1;
        } else {
            return Err(err(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
    registry: &'a CommandRegistry,
    ctx: &'a ExecCtx,
    vars: &'a HashMap<String, Value>,
}

impl Parser<'_> {
    fn err(&self, reason: impl Into<String>) -> CodegenError {
        CodegenError::Script {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<(), CodegenError> {
        match self.next() {
            Some(Tok::Punct(p)) if p == c => Ok(()),
            other => Err(self.err(format!("expected '{c}', found {other:?}"))),
        }
    }

    fn number(&self, text: &str) -> Result<Value, CodegenError> {
        if text.contains(['.', 'e', 'E']) {
            text.parse::<f64>()
                .map(Value::Real)
                .map_err(|e| self.err(e.to_string()))
        } else {
            text.parse::<i64>().map(Value::Int).map_err(|e| self.err(e.to_string()))
        }
    }

    fn expr(&mut self) -> Result<Value, CodegenError> {
        match self.next() {
            Some(Tok::Num(n)) => self.number(&n),
            Some(Tok::Str(s)) => Ok(Value::Text(s)),
            Some(Tok::Punct('[')) => {
                let mut xs = Vec::new();
                loop {
                    match self.next() {
                        Some(Tok::Punct(']')) => break,
                        Some(Tok::Punct(',')) => {}
                        Some(Tok::Num(n)) => xs.push(self.number(&n)?.as_f64().unwrap_or(f64::NAN)),
                        other => return Err(self.err(format!("bad array element {other:?}"))),
                    }
                }
                Value::array(xs).map_err(|e| self.err(e.to_string()))
            }
            Some(Tok::Ident(name)) if name == "None" => Ok(Value::Unit),
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::Punct('(')) {
                    self.call(&name)
                } else {
                    self.vars
                        .get(&name)
                        .cloned()
                        .ok_or_else(|| self.err(format!("undefined variable '{name}'")))
                }
            }
            other => Err(self.err(format!("unexpected {other:?}"))),
        }
    }

    fn call(&mut self, name: &str) -> Result<Value, CodegenError> {
        self.expect('(')?;
        let mut args = Vec::new();
        let mut seed = None;
        if self.peek() == Some(&Tok::Punct(')')) {
            self.pos += 1;
        } else {
            loop {
                let is_kw = matches!(self.peek(), Some(Tok::Ident(k)) if k == "seed")
                    && self.toks.get(self.pos + 1) == Some(&Tok::Punct('='));
                if is_kw {
                    self.pos += 2;
                    match self.next() {
                        Some(Tok::Num(n)) => seed = Some(n.parse::<u64>().map_err(|e| self.err(e.to_string()))?),
                        other => return Err(self.err(format!("bad seed {other:?}"))),
                    }
                } else {
                    args.push(self.expr()?);
                }
                match self.next() {
                    Some(Tok::Punct(',')) => continue,
                    Some(Tok::Punct(')')) => break,
                    other => return Err(self.err(format!("expected ',' or ')', found {other:?}"))),
                }
            }
        }
        let cmd = self
            .registry
            .get(name)
            .ok_or_else(|| CodegenError::UnknownCommand(name.to_string()))?;
        if args.len() != cmd.args.len() {
            return Err(CodegenError::ArityMismatch {
                command: name.to_string(),
                expected: cmd.args.len(),
                found: args.len(),
            });
        }
        let mut ctx = self.ctx.clone();
        if let Some(s) = seed {
            ctx.seed = s;
        }
        (cmd.body)(&args, &ctx).map_err(|e| self.err(format!("{name}: {e}")))
    }
}

/// Runs every statement and returns the value of the last one, with the
/// final variable bindings.
pub fn evaluate_script(
    script: &str,
    registry: &CommandRegistry,
    ctx: &ExecCtx,
) -> Result<(Option<Value>, HashMap<String, Value>), CodegenError> {
    let mut vars: HashMap<String, Value> = HashMap::new();
    let mut last = None;
    let mut in_def = false;
    for (i, line) in script.lines().enumerate() {
        let n = i + 1;
        if line.starts_with("def ") {
            in_def = true;
            continue;
        }
        if line.trim().is_empty() || (in_def && line.starts_with([' ', '\t'])) {
            continue;
        }
        in_def = false;
        let toks = lex(line, n)?;
        let target = match (toks.first(), toks.get(1)) {
            (Some(Tok::Ident(name)), Some(Tok::Punct('='))) => Some(name.clone()),
            _ => None,
        };
        let mut p = Parser {
            pos: if target.is_some() { 2 } else { 0 },
            toks,
            line: n,
            registry,
            ctx,
            vars: &vars,
        };
        let value = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(CodegenError::Script {
                line: n,
                reason: "trailing tokens".into(),
            });
        }
        if let Some(name) = target {
            vars.insert(name, value.clone());
        }
        last = Some(value);
    }
    Ok((last, vars))
}
