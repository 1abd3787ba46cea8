//! Commands: functions annotated with conversational metadata, plus the
//! template matcher that pulls argument spans out of a request and the
//! learner that turns a successful request into a new template.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Environment;
use crate::text::{span_text, tokenize, Token};
use crate::types::{resolve_option, ArgOrigin, ParseOutcome, TypeRegistry};
use crate::value::{Value, ValueError};

/// Longest span a single slot may capture.
pub const MAX_SLOT_SPAN: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("command '{command}' is malformed: {reason}")]
    Definition { command: String, reason: String },
    #[error("{0}")]
    Stats(#[from] crate::stats::StatsError),
    #[error("{0}")]
    Value(#[from] ValueError),
    #[error("{0}")]
    Invalid(String),
}

/// Everything a command body may consult besides its arguments.
#[derive(Debug, Clone)]
pub struct ExecCtx {
    /// Seed for commands that draw random numbers.
    pub seed: u64,
    /// Relative paths given to file-reading commands resolve here.
    pub data_dir: PathBuf,
    /// Significance threshold for "select significant".
    pub alpha: f64,
    /// Lexicon used by lexicon analysis, relative to `data_dir` unless absolute.
    pub lexicon: PathBuf,
}

impl Default for ExecCtx {
    fn default() -> Self {
        ExecCtx {
            seed: 0,
            data_dir: PathBuf::from("."),
            alpha: 0.05,
            lexicon: PathBuf::from("lexicon.tsv"),
        }
    }
}

impl ExecCtx {
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        if p.is_absolute() {
            p
        } else {
            self.data_dir.join(p)
        }
    }
}

pub type Body = Arc<dyn Fn(&[Value], &ExecCtx) -> Result<Value, CommandError> + Send + Sync>;
/// Renders a result for display; also sees the arguments the command ran with.
pub type Explain = Arc<dyn Fn(&Value, &[Value]) -> String + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaKind {
    Help,
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Pure,
    /// Draws random numbers; the seed is recorded with the call.
    Random,
    /// Binds `value_slot` in the environment under the name given in `name_slot`.
    Save {
        value_slot: usize,
        name_slot: usize,
    },
    /// Conversation-level commands; never reach the AST.
    Meta(MetaKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgSpec {
    pub name: String,
    pub type_name: String,
    /// Replaces the type's default clarification question.
    pub question: Option<String>,
    /// Fixed choices; empty for free-form arguments.
    pub options: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Authored,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateToken {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub tokens: Vec<TemplateToken>,
    pub origin: Origin,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self
            .tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Literal(w) => w.clone(),
                TemplateToken::Slot(s) => format!("{{{s}}}"),
            })
            .collect();
        f.write_str(&words.join(" "))
    }
}

fn slot_name(word: &str) -> Option<&str> {
    let inner = word.strip_prefix('{')?.strip_suffix('}')?;
    (!inner.is_empty() && inner.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')).then_some(inner)
}

impl Template {
    pub fn parse(text: &str, origin: Origin) -> Template {
        let tokens = tokenize(text)
            .into_iter()
            .map(|t| match slot_name(&t.raw) {
                Some(name) => TemplateToken::Slot(name.to_string()),
                None => TemplateToken::Literal(t.norm),
            })
            .collect();
        Template { tokens, origin }
    }

    pub fn slots(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .filter_map(|t| match t {
                TemplateToken::Slot(s) => Some(s.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn has_adjacent_slots(&self) -> bool {
        self.tokens
            .windows(2)
            .any(|w| matches!(w, [TemplateToken::Slot(_), TemplateToken::Slot(_)]))
    }

    /// Template words with slots removed; used as classifier training text.
    /// Slot boundaries are kept as `|` so no bigram bridges a slot.
    pub fn training_text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Literal(w) => w.as_str(),
                TemplateToken::Slot(_) => "|",
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn same_shape(&self, other: &Template) -> bool {
        self.tokens == other.tokens
    }
}

/// A slot's captured token range, `start..end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSpan {
    pub slot: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Aligns `tpl` against the whole utterance.
///
/// Literals match case-insensitively, each slot takes 1 to
/// [`MAX_SLOT_SPAN`] tokens. The total slot span of any full alignment is
/// fixed, so among all alignments the one whose span lengths are
/// lexicographically smallest wins; a depth-first search that tries shorter
/// spans first finds it directly.
pub fn match_template(tpl: &Template, utterance: &[Token]) -> Option<Vec<SlotSpan>> {
    let mut lens = Vec::new();
    if !align(&tpl.tokens, utterance, &mut lens) {
        return None;
    }
    let mut pos = 0;
    let mut out = Vec::new();
    let mut lens = lens.into_iter();
    for tok in &tpl.tokens {
        match tok {
            TemplateToken::Literal(_) => pos += 1,
            TemplateToken::Slot(name) => {
                let len = lens.next().expect("one length per slot");
                out.push(SlotSpan {
                    slot: name.clone(),
                    start: pos,
                    end: pos + len,
                    text: span_text(utterance, pos, pos + len),
                });
                pos += len;
            }
        }
    }
    Some(out)
}

fn align(tpl: &[TemplateToken], utt: &[Token], lens: &mut Vec<usize>) -> bool {
    let Some((head, rest)) = tpl.split_first() else {
        return utt.is_empty();
    };
    // every remaining template token needs at least one utterance token
    if utt.len() < tpl.len() {
        return false;
    }
    match head {
        TemplateToken::Literal(w) => utt[0].norm == *w && align(rest, &utt[1..], lens),
        TemplateToken::Slot(_) => {
            let max = MAX_SLOT_SPAN.min(utt.len() - rest.len());
            for len in 1..=max {
                lens.push(len);
                if align(rest, &utt[len..], lens) {
                    return true;
                }
                lens.pop();
            }
            false
        }
    }
}

/// Builds a template from a request that ran successfully.
///
/// `resolved` maps slots to the text the user gave for them. Slots are
/// placed in declaration order, each at the leftmost free occurrence of its
/// text. Returns `None` when no slot text could be placed and the request is
/// already covered, when the result duplicates `existing`, has no literal
/// words, puts two slots side by side, or would not reproduce the same spans
/// when matched again.
pub fn learn_template(existing: &[Template], utterance: &[Token], resolved: &[(String, String)]) -> Option<Template> {
    if utterance.is_empty() {
        return None;
    }
    let mut used = vec![false; utterance.len()];
    let mut placed: Vec<(usize, usize, String)> = Vec::new();
    for (slot, text) in resolved {
        let needle: Vec<String> = tokenize(text).into_iter().map(|t| t.norm).collect();
        if needle.is_empty() || needle.len() > MAX_SLOT_SPAN || needle.len() > utterance.len() {
            continue;
        }
        let found = (0..=utterance.len() - needle.len()).find(|&i| {
            (i..i + needle.len()).all(|j| !used[j])
                && needle.iter().enumerate().all(|(k, w)| utterance[i + k].norm == *w)
        });
        if let Some(i) = found {
            used[i..i + needle.len()].iter_mut().for_each(|u| *u = true);
            placed.push((i, i + needle.len(), slot.clone()));
        }
    }
    placed.sort();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut spans = placed.iter().peekable();
    while i < utterance.len() {
        match spans.peek() {
            Some((start, end, slot)) if *start == i => {
                tokens.push(TemplateToken::Slot(slot.clone()));
                i = *end;
                spans.next();
            }
            _ => {
                tokens.push(TemplateToken::Literal(utterance[i].norm.clone()));
                i += 1;
            }
        }
    }
    let tpl = Template {
        tokens,
        origin: Origin::Learned,
    };
    if tpl.slots().len() == tpl.tokens.len() || tpl.has_adjacent_slots() {
        return None;
    }
    if existing.iter().any(|t| t.same_shape(&tpl)) {
        return None;
    }
    let spans = match_template(&tpl, utterance)?;
    let expected: Vec<(usize, usize)> = placed.iter().map(|(s, e, _)| (*s, *e)).collect();
    let got: Vec<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
    (expected == got).then_some(tpl)
}

/// One extracted argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub value: Value,
    pub origin: ArgOrigin,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    /// Which template matched, if any.
    pub template: Option<Template>,
    pub bound: IndexMap<String, Extracted>,
    /// Spans that named a value of the wrong type; the interpreter may
    /// offer a conversion for these.
    pub mismatched: IndexMap<String, Extracted>,
    /// Spans that did not parse at all.
    pub dropped: IndexMap<String, String>,
}

/// Phrase → option label, per slot, learned from user choices.
pub type SlotSynonyms = IndexMap<String, String>;

/// Parses `text` as an answer for `arg`. Option slots accept an option
/// label or a learned synonym; other slots go through the type's parser.
pub fn parse_arg(
    types: &TypeRegistry,
    arg: &ArgSpec,
    text: &str,
    env: &Environment,
    synonyms: Option<&SlotSynonyms>,
) -> ParseOutcome {
    if !arg.options.is_empty() {
        if let Some(label) = resolve_option(&arg.options, text) {
            return ParseOutcome::Direct(Value::Text(label), ArgOrigin::Literal);
        }
        let key = text.trim().to_lowercase();
        if let Some(label) = synonyms.and_then(|s| s.get(&key)) {
            return ParseOutcome::Direct(Value::Text(label.clone()), ArgOrigin::Literal);
        }
        return ParseOutcome::NoParse;
    }
    match types.get(&arg.type_name) {
        Ok(t) => t.parse_input(text, env),
        Err(_) => ParseOutcome::NoParse,
    }
}

#[derive(Clone)]
pub struct CommandSpec {
    pub id: String,
    pub title: String,
    /// Phrase used in "Sure, I can {intro}".
    pub intro: String,
    pub examples: Vec<String>,
    pub help_text: Vec<String>,
    pub args: Vec<ArgSpec>,
    /// Types the body can return.
    pub returns: Vec<String>,
    pub kind: CommandKind,
    pub body: Body,
    pub explanation: Explain,
    pub source_snippet: String,
    templates: Vec<Template>,
}

impl fmt::Debug for CommandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommandSpec")
            .field("id", &self.id)
            .field("title", &self.title)
            .field("args", &self.args)
            .field("returns", &self.returns)
            .field("kind", &self.kind)
            .finish()
    }
}

impl CommandSpec {
    pub fn builder(id: &str, title: &str) -> CommandBuilder {
        CommandBuilder {
            spec: CommandSpec {
                id: id.to_string(),
                title: title.to_string(),
                intro: String::new(),
                examples: Vec::new(),
                help_text: Vec::new(),
                args: Vec::new(),
                returns: Vec::new(),
                kind: CommandKind::Pure,
                body: Arc::new(|_, _| Ok(Value::Unit)),
                explanation: Arc::new(|v, _| v.summary()),
                source_snippet: String::new(),
                templates: Vec::new(),
            },
        }
    }

    /// Title first, then examples.
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn arg(&self, name: &str) -> Option<&ArgSpec> {
        self.args.iter().find(|a| a.name == name)
    }

    pub fn arg_index(&self, name: &str) -> Option<usize> {
        self.args.iter().position(|a| a.name == name)
    }

    pub fn is_meta(&self) -> bool {
        matches!(self.kind, CommandKind::Meta(_))
    }

    pub fn question(&self, types: &TypeRegistry, arg: &ArgSpec) -> String {
        match &arg.question {
            Some(q) => q.clone(),
            None => types
                .get(&arg.type_name)
                .map(|t| t.question_for(&arg.name))
                .unwrap_or_else(|_| format!("What should I use for {}?", arg.name)),
        }
    }

    /// Matches the authored templates, then `learned`, and parses each span
    /// of the match with the most literal words. Ties go to the earlier
    /// template.
    pub fn extract_arguments(
        &self,
        types: &TypeRegistry,
        learned: &[Template],
        utterance: &[Token],
        env: &Environment,
        synonyms: &IndexMap<String, SlotSynonyms>,
    ) -> Extraction {
        let mut out = Extraction::default();
        let mut best: Option<(&Template, Vec<SlotSpan>, usize)> = None;
        for t in self.templates.iter().chain(learned) {
            let Some(spans) = match_template(t, utterance) else {
                continue;
            };
            let literals = t.tokens.len() - spans.len();
            if best.as_ref().is_none_or(|b| literals > b.2) {
                best = Some((t, spans, literals));
            }
        }
        let Some((tpl, spans, _)) = best else {
            return out;
        };
        out.template = Some(tpl.clone());
        for span in spans {
            let Some(arg) = self.arg(&span.slot) else { continue };
            match parse_arg(types, arg, &span.text, env, synonyms.get(&arg.name)) {
                ParseOutcome::Direct(value, origin) => {
                    out.bound.insert(
                        span.slot,
                        Extracted {
                            value,
                            origin,
                            text: span.text,
                        },
                    );
                }
                ParseOutcome::Mismatch(value, origin) => {
                    out.mismatched.insert(
                        span.slot,
                        Extracted {
                            value,
                            origin,
                            text: span.text,
                        },
                    );
                }
                ParseOutcome::NoParse => {
                    out.dropped.insert(span.slot, span.text);
                }
            }
        }
        out
    }

    /// The title with known slots filled in: `{score}` where the user gave
    /// "score", `{col}` where nothing is known yet.
    pub fn render_title_hint(&self, partial: &IndexMap<String, String>) -> String {
        let mut out = self.title.clone();
        for arg in &self.args {
            if let Some(text) = partial.get(&arg.name) {
                out = out.replace(&format!("{{{}}}", arg.name), &format!("{{{text}}}"));
            }
        }
        out
    }
}

pub struct CommandBuilder {
    spec: CommandSpec,
}

impl CommandBuilder {
    pub fn intro(mut self, intro: &str) -> Self {
        self.spec.intro = intro.to_string();
        self
    }

    pub fn examples(mut self, examples: &[&str]) -> Self {
        self.spec.examples.extend(examples.iter().map(|e| e.to_string()));
        self
    }

    pub fn help(mut self, lines: &[&str]) -> Self {
        self.spec.help_text.extend(lines.iter().map(|l| l.to_string()));
        self
    }

    pub fn arg(mut self, name: &str, type_name: &str) -> Self {
        self.spec.args.push(ArgSpec {
            name: name.to_string(),
            type_name: type_name.to_string(),
            question: None,
            options: Vec::new(),
        });
        self
    }

    /// An argument with its own clarification question.
    pub fn ask(mut self, name: &str, type_name: &str, question: &str) -> Self {
        self = self.arg(name, type_name);
        self.spec.args.last_mut().unwrap().question = Some(question.to_string());
        self
    }

    pub fn choice(mut self, name: &str, options: &[&str], question: &str) -> Self {
        self = self.ask(name, "String", question);
        self.spec.args.last_mut().unwrap().options = options.iter().map(|o| o.to_string()).collect();
        self
    }

    pub fn returns(mut self, types: &[&str]) -> Self {
        self.spec.returns = types.iter().map(|t| t.to_string()).collect();
        self
    }

    pub fn kind(mut self, kind: CommandKind) -> Self {
        self.spec.kind = kind;
        self
    }

    pub fn body(
        mut self,
        f: impl Fn(&[Value], &ExecCtx) -> Result<Value, CommandError> + Send + Sync + 'static,
    ) -> Self {
        self.spec.body = Arc::new(f);
        self
    }

    pub fn explain(mut self, f: impl Fn(&Value, &[Value]) -> String + Send + Sync + 'static) -> Self {
        self.spec.explanation = Arc::new(f);
        self
    }

    pub fn snippet(mut self, code: &str) -> Self {
        self.spec.source_snippet = code.trim_matches('\n').to_string();
        self
    }

    pub fn build(mut self) -> Result<CommandSpec, CommandError> {
        let id = self.spec.id.clone();
        let bad = |reason: String| CommandError::Definition {
            command: id.clone(),
            reason,
        };
        let mut seen = HashSet::new();
        for a in &self.spec.args {
            if !seen.insert(a.name.as_str()) {
                return Err(bad(format!("argument '{}' declared twice", a.name)));
            }
        }
        let title = Template::parse(&self.spec.title, Origin::Authored);
        let title_slots: HashSet<&str> = title.slots().into_iter().collect();
        for a in &self.spec.args {
            if !title_slots.contains(a.name.as_str()) {
                return Err(bad(format!("argument '{}' missing from the title", a.name)));
            }
        }
        let mut templates = vec![title.clone()];
        for ex in &self.spec.examples {
            let t = Template::parse(ex, Origin::Authored);
            let mut in_template = HashSet::new();
            for s in t.slots() {
                if self.spec.arg(s).is_none() {
                    return Err(bad(format!("example '{ex}' uses undeclared slot '{s}'")));
                }
                if !in_template.insert(s) {
                    return Err(bad(format!("example '{ex}' repeats slot '{s}'")));
                }
            }
            if t.slots().len() == t.tokens.len() {
                return Err(bad(format!("example '{ex}' has no literal words")));
            }
            if !templates.iter().any(|x: &Template| x.same_shape(&t)) {
                templates.push(t);
            }
        }
        for s in title.slots() {
            if self.spec.arg(s).is_none() {
                return Err(bad(format!("title uses undeclared slot '{s}'")));
            }
        }
        if self.spec.intro.is_empty() {
            self.spec.intro = self.spec.title.clone();
        }
        if self.spec.returns.is_empty() {
            return Err(bad("no return type".into()));
        }
        self.spec.templates = templates;
        Ok(self.spec)
    }
}

/// Commands by id, in registration order.
#[derive(Debug, Clone, Default)]
pub struct CommandRegistry {
    commands: IndexMap<String, Arc<CommandSpec>>,
}

impl CommandRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: CommandSpec) -> Result<(), CommandError> {
        if self.commands.contains_key(&spec.id) {
            return Err(CommandError::Definition {
                command: spec.id.clone(),
                reason: "registered twice".into(),
            });
        }
        self.commands.insert(spec.id.clone(), Arc::new(spec));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<CommandSpec>> {
        self.commands.get(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.commands.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<CommandSpec>> {
        self.commands.values()
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}
