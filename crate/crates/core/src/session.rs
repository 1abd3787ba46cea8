//! The interpreter: one session's turn loop.
//!
//! A request is classified, its arguments are pulled out of the text, and a
//! per-command machine asks for whatever is still missing. An answer that
//! is not a value of the right type may name a value to convert, or be a
//! request in its own right whose result fills the slot.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::automata::{
    MachineDef, MachineError, MachineInstance, MachineStack, Prompt, Scope, StackOutcome, StateNode, StepCtx,
    StepResult, RETURN_SLOT,
};
use crate::codegen::{
    build_ast_node, export_script, ArgSource, CallNode, CodegenError, ConversationAst, ReferenceRenderer, Stmt,
};
use crate::command::{parse_arg, CommandKind, CommandSpec, MetaKind};
use crate::engine::{mask_names, Engine, Hint};
use crate::env::{normalize_name, Environment};
use crate::text::{tokenize, Token};
use crate::types::{resolve_option, with_article, ArgOrigin, ConversionPlan, ParseOutcome};
use crate::value::Value;

/// Words that cancel the conversation in progress.
pub const ABORT_PHRASES: [&str; 3] = ["never mind", "nevermind", "cancel"];
const YES: [&str; 6] = ["yes", "y", "yeah", "sure", "ok", "okay"];
const NO: [&str; 3] = ["no", "n", "nope"];
/// Number of hints returned for a draft.
pub const HINT_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum AgentResponse {
    Say {
        text: String,
    },
    Ask {
        prompt: String,
        expected_type: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        options: Vec<String>,
    },
    ShowValue {
        value: Value,
        explanation: String,
    },
    ShowHelp {
        text: String,
    },
    Error {
        text: String,
    },
}

impl AgentResponse {
    /// The text a user reads for this response.
    pub fn text(&self) -> &str {
        match self {
            AgentResponse::Say { text } | AgentResponse::ShowHelp { text } | AgentResponse::Error { text } => text,
            AgentResponse::Ask { prompt, .. } => prompt,
            AgentResponse::ShowValue { explanation, .. } => explanation,
        }
    }
}

/// The question the session is waiting on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingAsk {
    pub prompt: String,
    pub expected_type: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintReply {
    pub ranked: Vec<Hint>,
    pub pending: Option<PendingAsk>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvVar {
    pub name: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub preview: String,
}

/// One command being gathered or run.
#[derive(Debug, Clone)]
struct Invocation {
    cmd: Arc<CommandSpec>,
    tokens: Vec<Token>,
    utterance: String,
    novel: bool,
    prebound: Vec<Option<Value>>,
    sources: Vec<Option<ArgSource>>,
    /// The user's words for each slot, when typed directly.
    texts: Vec<Option<String>>,
    mismatched: Vec<Option<(Value, ArgSource)>>,
    dropped: Vec<Option<String>>,
    plans: Vec<Option<ConversionPlan>>,
    introduced: bool,
}

fn source_of(origin: ArgOrigin, value: &Value) -> ArgSource {
    match origin {
        ArgOrigin::Literal => ArgSource::Literal { value: value.clone() },
        ArgOrigin::Var(name) => ArgSource::VarRef { name },
        ArgOrigin::History(index) => ArgSource::HistoryRef { index },
    }
}

fn arg_key(name: &str) -> String {
    format!("arg:{name}")
}

#[derive(Clone)]
struct Snapshot {
    env: Environment,
    ast: ConversationAst,
    last_command: Option<String>,
    draws: u64,
}

/// Everything the command machines act on.
pub struct SessionCore {
    engine: Arc<Engine>,
    env: Environment,
    ast: ConversationAst,
    outbox: Vec<AgentResponse>,
    frames: Vec<Invocation>,
    /// Call node of the nested command that just finished.
    returned: Option<CallNode>,
    turn: usize,
    rng_seed: u64,
    draws: u64,
    last_command: Option<String>,
    pending: Option<PendingAsk>,
}

impl SessionCore {
    fn inv(&mut self) -> &mut Invocation {
        self.frames.last_mut().expect("a command is active")
    }

    fn say(&mut self, text: impl Into<String>) {
        self.outbox.push(AgentResponse::Say { text: text.into() });
    }

    fn error(&mut self, text: impl Into<String>) {
        self.outbox.push(AgentResponse::Error { text: text.into() });
    }

    fn ask(&mut self, prompt: String, expected_type: &str, options: Vec<String>) -> String {
        self.pending = Some(PendingAsk {
            prompt: prompt.clone(),
            expected_type: expected_type.to_string(),
            options: options.clone(),
        });
        self.outbox.push(AgentResponse::Ask {
            prompt: prompt.clone(),
            expected_type: expected_type.to_string(),
            options,
        });
        prompt
    }

    fn introduce(&mut self) {
        let inv = self.inv();
        if inv.introduced {
            return;
        }
        inv.introduced = true;
        let intro = format!("Sure, I can {}", inv.cmd.intro);
        self.say(intro);
    }

    /// Seed for the next random command; the counter rolls back with a
    /// failed command.
    fn next_seed(&mut self) -> u64 {
        self.draws += 1;
        let mut z = self
            .rng_seed
            .wrapping_add(self.draws.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        (z ^ (z >> 31)) & 0xFFFF_FFFF
    }

    fn new_invocation(&self, cmd: Arc<CommandSpec>, utterance: &str) -> Invocation {
        let tokens = tokenize(utterance);
        let ext = self.engine.extract(&cmd, &tokens, &self.env);
        let n = cmd.args.len();
        let mut inv = Invocation {
            cmd: cmd.clone(),
            tokens,
            utterance: utterance.to_string(),
            novel: ext.template.is_none(),
            prebound: vec![None; n],
            sources: vec![None; n],
            texts: vec![None; n],
            mismatched: vec![None; n],
            dropped: vec![None; n],
            plans: vec![None; n],
            introduced: false,
        };
        for (i, arg) in cmd.args.iter().enumerate() {
            if let Some(e) = ext.bound.get(&arg.name) {
                inv.sources[i] = Some(source_of(e.origin.clone(), &e.value));
                inv.prebound[i] = Some(e.value.clone());
                inv.texts[i] = Some(e.text.clone());
            } else if let Some(e) = ext.mismatched.get(&arg.name) {
                inv.mismatched[i] = Some((e.value.clone(), source_of(e.origin.clone(), &e.value)));
                inv.texts[i] = Some(e.text.clone());
            } else if let Some(t) = ext.dropped.get(&arg.name) {
                inv.dropped[i] = Some(t.clone());
            }
        }
        inv
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            env: self.env.clone(),
            ast: self.ast.clone(),
            last_command: self.last_command.clone(),
            draws: self.draws,
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.env = s.env;
        self.ast = s.ast;
        self.last_command = s.last_command;
        self.draws = s.draws;
        self.frames.clear();
        self.returned = None;
        self.pending = None;
    }
}

fn next_state(i: usize, n: usize) -> String {
    if i + 1 < n {
        format!("check_{}", i + 1)
    } else {
        "exec".to_string()
    }
}

/// Binds slot `i` to a value, records where it came from, and says so when
/// it came out of a conversion.
fn bind_slot(ctx: &mut StepCtx<'_, SessionCore>, i: usize, value: Value, source: ArgSource, text: Option<String>) {
    let inv = ctx.host.inv();
    let name = inv.cmd.args[i].name.clone();
    inv.sources[i] = Some(source);
    inv.mismatched[i] = None;
    inv.plans[i] = None;
    if text.is_some() {
        inv.texts[i] = text;
    }
    ctx.scope.bind(arg_key(&name), value);
}

/// Re-asks slot `i` after an unusable answer.
fn reask(ctx: &mut StepCtx<'_, SessionCore>, i: usize, reason: String) -> StepResult<SessionCore> {
    let cmd = ctx.host.inv().cmd.clone();
    let arg = &cmd.args[i];
    let question = cmd.question(ctx.host.engine.types(), arg);
    let prompt = ctx
        .host
        .ask(format!("{reason} {question}"), &arg.type_name, arg.options.clone());
    StepResult::Suspend(prompt)
}

/// Applies a planned conversion with the chosen label.
fn convert(ctx: &mut StepCtx<'_, SessionCore>, i: usize, choice: &str) -> Result<(), String> {
    let inv = ctx.host.inv();
    let (Some(plan), Some((value, source))) = (inv.plans[i].clone(), inv.mismatched[i].clone()) else {
        return Err("nothing to convert".into());
    };
    let converted = ctx
        .host
        .engine
        .types()
        .apply_conversion(&plan, choice, &value)
        .map_err(|e| e.to_string())?;
    let label = if plan.needs_choice {
        resolve_option(&plan.options, choice).unwrap_or_else(|| choice.to_string())
    } else {
        String::new()
    };
    let via = CallNode {
        command: plan.via.clone(),
        args: vec![
            ArgSource::Literal {
                value: Value::Text(label.clone()),
            },
            source,
        ],
        seed: None,
    };
    ctx.host.say(format!("Great, I'm using {label}"));
    bind_slot(ctx, i, converted, ArgSource::Nested { call: via }, None);
    Ok(())
}

/// Plans a conversion for a wrong-typed value in slot `i`. Returns the
/// state to go to, or an explanation when no conversion exists.
fn plan_for(ctx: &mut StepCtx<'_, SessionCore>, i: usize, value: Value, source: ArgSource) -> Result<String, String> {
    let cmd = ctx.host.inv().cmd.clone();
    let n = cmd.args.len();
    let target = cmd.args[i].type_name.clone();
    let engine = ctx.host.engine.clone();
    let plan = engine.types().plan_conversion(&target, &value).map_err(|_| {
        format!(
            "I need {} but you've given me {}, and I can't convert it.",
            with_article(&target),
            with_article(value.type_name())
        )
    })?;
    let inv = ctx.host.inv();
    inv.mismatched[i] = Some((value, source));
    inv.plans[i] = Some(plan.clone());
    if engine.config().auto_single_option && plan.needs_choice && plan.options.len() == 1 {
        convert(ctx, i, &plan.options[0])?;
        return Ok(next_state(i, n));
    }
    Ok(format!("confirm_{i}"))
}

fn check_state(i: usize, n: usize) -> StateNode<SessionCore> {
    StateNode::action(format!("check_{i}"), move |ctx: &mut StepCtx<'_, SessionCore>| {
        let cmd = ctx.host.inv().cmd.clone();
        let key = arg_key(&cmd.args[i].name);
        if ctx.scope.get_local(&key).is_some() {
            return StepResult::Goto(next_state(i, n));
        }
        if let Some(v) = ctx.host.inv().prebound[i].take() {
            ctx.scope.bind(key, v);
            return StepResult::Goto(next_state(i, n));
        }
        if let Some((v, src)) = ctx.host.inv().mismatched[i].clone() {
            return match plan_for(ctx, i, v, src) {
                Ok(state) => StepResult::Goto(state),
                Err(_) => {
                    // an extracted span of the wrong type is simply asked for again
                    ctx.host.inv().mismatched[i] = None;
                    StepResult::Goto(format!("ask_{i}"))
                }
            };
        }
        StepResult::Goto(format!("ask_{i}"))
    })
}

fn ask_state(i: usize, n: usize) -> StateNode<SessionCore> {
    let prompt = Prompt::Computed(Arc::new(move |ctx: &mut StepCtx<'_, SessionCore>| {
        ctx.host.introduce();
        let cmd = ctx.host.inv().cmd.clone();
        let arg = &cmd.args[i];
        let q = cmd.question(ctx.host.engine.types(), arg);
        ctx.host.ask(q, &arg.type_name, arg.options.clone())
    }));
    StateNode::input(format!("ask_{i}"), prompt, move |ctx, text| {
        let engine = ctx.host.engine.clone();
        let cmd = ctx.host.inv().cmd.clone();
        let arg = &cmd.args[i];
        let synonyms = engine.synonyms(&cmd.id);
        match parse_arg(engine.types(), arg, text, &ctx.host.env, synonyms.get(&arg.name)) {
            ParseOutcome::Direct(v, origin) => {
                if !arg.options.is_empty() {
                    if let (Some(phrase), Value::Text(label)) = (ctx.host.inv().dropped[i].take(), &v) {
                        engine.record_option_synonym(&cmd.id, &arg.name, &phrase, label);
                    }
                }
                let src = source_of(origin, &v);
                bind_slot(ctx, i, v, src, Some(text.trim().to_string()));
                StepResult::Goto(next_state(i, n))
            }
            ParseOutcome::Mismatch(v, origin) => {
                let src = source_of(origin, &v);
                ctx.host.inv().texts[i] = Some(text.trim().to_string());
                match plan_for(ctx, i, v, src) {
                    Ok(state) => StepResult::Goto(state),
                    Err(reason) => reask(ctx, i, reason),
                }
            }
            ParseOutcome::NoParse if !arg.options.is_empty() => {
                reask(ctx, i, format!("Sorry, '{}' isn't one of the options.", text.trim()))
            }
            ParseOutcome::NoParse => {
                let what = with_article(&arg.type_name);
                if !engine.recognizes(text, &ctx.host.env) {
                    return reask(ctx, i, format!("Sorry, I couldn't use '{}' as {what}.", text.trim()));
                }
                let child = engine.classify_in(text, &ctx.host.env);
                let fits = !child.is_meta()
                    && child
                        .returns
                        .iter()
                        .any(|r| engine.types().accepts_type(&arg.type_name, r));
                if !fits {
                    return reask(ctx, i, format!("Sorry, I couldn't use '{}' as {what}.", text.trim()));
                }
                if ctx.host.frames.len() >= engine.config().depth_cap {
                    return reask(ctx, i, "Sorry, that nests requests too deeply.".to_string());
                }
                let def = engine.machine(&child.id).expect("every command has a machine");
                let inv = ctx.host.new_invocation(child, text.trim());
                ctx.host.frames.push(inv);
                StepResult::Call {
                    child: MachineInstance::nested(def, ctx.scope),
                    resume_at: format!("bind_{i}"),
                }
            }
        }
    })
}

fn bind_state(i: usize, n: usize) -> StateNode<SessionCore> {
    StateNode::action(format!("bind_{i}"), move |ctx: &mut StepCtx<'_, SessionCore>| {
        let value = ctx.scope.take(RETURN_SLOT).unwrap_or(Value::Unit);
        let call = ctx.host.returned.take();
        let Some(call) = call else {
            return StepResult::Fail("a nested request returned without a record".into());
        };
        let cmd = ctx.host.inv().cmd.clone();
        let target = cmd.args[i].type_name.clone();
        let src = ArgSource::Nested { call };
        let types = ctx.host.engine.types();
        if (types.get(&target).map(|t| t.matches)).is_ok_and(|m| m(&value)) {
            ctx.host.say(format!(
                "Sure, I'm using this {}:\n{}",
                value.type_name().to_lowercase(),
                value.summary()
            ));
            bind_slot(ctx, i, value, src, None);
            return StepResult::Goto(next_state(i, n));
        }
        match plan_for(ctx, i, value, src) {
            Ok(state) => StepResult::Goto(state),
            Err(reason) => {
                ctx.host.error(reason);
                StepResult::Goto(format!("ask_{i}"))
            }
        }
    })
}

fn confirm_state(i: usize, n: usize) -> StateNode<SessionCore> {
    let prompt = Prompt::Computed(Arc::new(move |ctx: &mut StepCtx<'_, SessionCore>| {
        let cmd = ctx.host.inv().cmd.clone();
        let plan = ctx.host.inv().plans[i].clone().expect("confirm follows a plan");
        ctx.host
            .ask(plan.prompt, &cmd.args[i].type_name, vec!["yes".into(), "no".into()])
    }));
    StateNode::input(format!("confirm_{i}"), prompt, move |ctx, text| {
        let answer = text.trim().to_lowercase();
        let answer = answer.trim_end_matches(['.', '!', ',']);
        let plan = ctx.host.inv().plans[i].clone().expect("confirm follows a plan");
        if YES.contains(&answer) {
            if !plan.needs_choice {
                return match convert(ctx, i, "") {
                    Ok(()) => StepResult::Goto(next_state(i, n)),
                    Err(e) => StepResult::Fail(e),
                };
            }
            let (value, _) = ctx.host.inv().mismatched[i].clone().expect("plan has a value");
            let engine = ctx.host.engine.clone();
            let conv = &engine.types().get(&plan.target).expect("planned type").converters[plan.converter];
            ctx.host.say((conv.describe)(&value));
            return StepResult::Goto(format!("choose_{i}"));
        }
        if NO.contains(&answer) {
            let inv = ctx.host.inv();
            inv.plans[i] = None;
            inv.mismatched[i] = None;
            return StepResult::Goto(format!("ask_{i}"));
        }
        if plan.needs_choice && resolve_option(&plan.options, text).is_some() {
            return match convert(ctx, i, text) {
                Ok(()) => StepResult::Goto(next_state(i, n)),
                Err(e) => StepResult::Fail(e),
            };
        }
        let cmd = ctx.host.inv().cmd.clone();
        let prompt = ctx.host.ask(
            format!("Please answer yes or no. {}", plan.prompt),
            &cmd.args[i].type_name,
            vec!["yes".into(), "no".into()],
        );
        StepResult::Suspend(prompt)
    })
}

fn choose_state(i: usize, n: usize) -> StateNode<SessionCore> {
    let question = move |ctx: &mut StepCtx<'_, SessionCore>| -> (String, String, Vec<String>) {
        let cmd = ctx.host.inv().cmd.clone();
        let plan = ctx.host.inv().plans[i].clone().expect("choice follows a plan");
        let engine = ctx.host.engine.clone();
        let conv = &engine.types().get(&plan.target).expect("planned type").converters[plan.converter];
        (
            conv.choice_question.to_string(),
            cmd.args[i].type_name.clone(),
            plan.options,
        )
    };
    let prompt = Prompt::Computed(Arc::new(move |ctx: &mut StepCtx<'_, SessionCore>| {
        let (q, t, options) = question(ctx);
        ctx.host.ask(q, &t, options)
    }));
    StateNode::input(format!("choose_{i}"), prompt, move |ctx, text| {
        match convert(ctx, i, text) {
            Ok(()) => StepResult::Goto(next_state(i, n)),
            Err(_) => {
                let (q, t, options) = question(ctx);
                let prompt = ctx.host.ask(
                    format!("Sorry, '{}' isn't one of the options. {q}", text.trim()),
                    &t,
                    options,
                );
                StepResult::Suspend(prompt)
            }
        }
    })
}

fn exec_state() -> StateNode<SessionCore> {
    StateNode::action("exec", |ctx: &mut StepCtx<'_, SessionCore>| {
        let inv = ctx.host.frames.last().cloned().expect("a command is active");
        let cmd = inv.cmd.clone();
        let engine = ctx.host.engine.clone();
        let top_level = ctx.host.frames.len() == 1;
        if let CommandKind::Meta(kind) = cmd.kind {
            ctx.host.frames.pop();
            match kind {
                MetaKind::Help => {
                    let text = match ctx.host.last_command.as_deref().and_then(|id| engine.command(id)) {
                        Some(last) => last.help_text.join("\n"),
                        None => "I haven't run any commands yet.".to_string(),
                    };
                    ctx.host.outbox.push(AgentResponse::ShowHelp { text });
                }
                MetaKind::Export => match export_script(&ctx.host.ast, engine.commands(), &ReferenceRenderer) {
                    Ok(script) => ctx
                        .host
                        .say(format!("Here is the script for this conversation:\n{script}")),
                    Err(e) => ctx.host.error(format!("I couldn't export the script: {e}")),
                },
            }
            return StepResult::Done(Value::Unit);
        }
        let mut args = Vec::with_capacity(cmd.args.len());
        let mut sources = Vec::with_capacity(cmd.args.len());
        for (i, a) in cmd.args.iter().enumerate() {
            match (ctx.scope.get_local(&arg_key(&a.name)), &inv.sources[i]) {
                (Some(v), Some(s)) => {
                    args.push(v.clone());
                    sources.push(s.clone());
                }
                _ => return StepResult::Fail(format!("argument '{}' was never resolved", a.name)),
            }
        }
        let seed = (cmd.kind == CommandKind::Random).then(|| ctx.host.next_seed());
        let exec_ctx = engine.config().exec_ctx(seed.unwrap_or(0));
        let value = match (cmd.body)(&args, &exec_ctx) {
            Ok(v) => v,
            Err(e) => {
                let msg = format!("Sorry, I couldn't {}: {e}", cmd.intro.trim_end_matches('.'));
                ctx.host.error(msg.clone());
                return StepResult::Fail(msg);
            }
        };
        if let Value::Real(x) = value {
            if !x.is_finite() {
                let msg = "Sorry, that produced a value that is not a finite number.".to_string();
                ctx.host.error(msg.clone());
                return StepResult::Fail(msg);
            }
        }
        let call = match build_ast_node(&cmd, sources.clone(), seed) {
            Ok(c) => c,
            Err(e) => return StepResult::Fail(e.to_string()),
        };
        let saved_as = match cmd.kind {
            CommandKind::Save { name_slot, .. } => match &args[name_slot] {
                Value::Text(raw) => {
                    let name = normalize_name(raw);
                    if let Err(e) = ctx.host.env.bind(&name, value.clone()) {
                        ctx.host.error(e.to_string());
                        return StepResult::Fail(e.to_string());
                    }
                    Some(name)
                }
                _ => return StepResult::Fail("the name must be text".into()),
            },
            _ => None,
        };
        let turn = ctx.host.turn;
        ctx.host.env.push_history(turn, value.clone());
        if top_level {
            let stmt = match (cmd.kind, saved_as) {
                (CommandKind::Save { value_slot, .. }, Some(name)) => Stmt::Assign {
                    name,
                    source: sources[value_slot].clone(),
                },
                _ => Stmt::Expr { call },
            };
            ctx.host.ast.record_statement(stmt);
            let explanation = (cmd.explanation)(&value, &args);
            ctx.host.outbox.push(AgentResponse::ShowValue {
                value: value.clone(),
                explanation,
            });
            if !matches!(cmd.kind, CommandKind::Save { .. }) {
                ctx.host.last_command = Some(cmd.id.clone());
            }
        } else {
            ctx.host.ast.record_nested(call.clone());
            ctx.host.returned = Some(call);
        }
        if inv.novel && engine.config().learning {
            let resolved: Vec<(String, String)> = cmd
                .args
                .iter()
                .zip(&inv.texts)
                .filter_map(|(a, t)| t.clone().map(|t| (a.name.clone(), t)))
                .collect();
            let learned = engine.learn_template(&cmd.id, &inv.tokens, &resolved);
            let example = learned
                .map(|t| t.training_text())
                .unwrap_or_else(|| mask_names(&inv.utterance, &ctx.host.env));
            if let Err(e) = engine.add_example(&example, &cmd.id) {
                log::warn!("could not add example: {e}");
            }
        }
        ctx.host.frames.pop();
        StepResult::Done(value)
    })
}

/// The gather-then-run machine for one command.
pub fn build_machine(cmd: Arc<CommandSpec>) -> Result<Arc<MachineDef<SessionCore>>, MachineError> {
    let n = cmd.args.len();
    let start = if n == 0 {
        "exec".to_string()
    } else {
        "check_0".to_string()
    };
    let mut b = MachineDef::builder(cmd.id.clone(), start);
    for i in 0..n {
        b = b
            .state(check_state(i, n))
            .state(ask_state(i, n))
            .state(bind_state(i, n))
            .state(confirm_state(i, n))
            .state(choose_state(i, n));
    }
    b.state(exec_state()).build()
}

fn normalize_phrase(text: &str) -> String {
    tokenize(text).into_iter().map(|t| t.norm).collect::<Vec<_>>().join(" ")
}

/// "no, I meant X" and friends; returns X.
fn correction(text: &str) -> Option<String> {
    let tokens = tokenize(text);
    let mut i = 0;
    while i < tokens.len() && matches!(tokens[i].norm.as_str(), "no" | "actually" | "sorry") {
        i += 1;
    }
    if tokens.get(i)?.norm == "i" && tokens.get(i + 1)?.norm == "meant" && tokens.len() > i + 2 {
        Some(
            tokens[i + 2..]
                .iter()
                .map(|t| t.raw.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        )
    } else {
        None
    }
}

/// One user's conversation.
pub struct Session {
    core: SessionCore,
    stack: MachineStack<SessionCore>,
    snapshot: Option<Snapshot>,
    /// Request that started the command in progress, or the last one.
    last_request: Option<(String, String)>,
}

impl Session {
    pub fn new(engine: Arc<Engine>, seed: u64) -> Session {
        let cap = engine.config().depth_cap;
        Session {
            core: SessionCore {
                engine,
                env: Environment::new(),
                ast: ConversationAst::new(),
                outbox: Vec::new(),
                frames: Vec::new(),
                returned: None,
                turn: 0,
                rng_seed: seed,
                draws: 0,
                last_command: None,
                pending: None,
            },
            stack: MachineStack::new(cap.saturating_add(1)),
            snapshot: None,
            last_request: None,
        }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.core.engine
    }

    pub fn env(&self) -> &Environment {
        &self.core.env
    }

    pub fn ast(&self) -> &ConversationAst {
        &self.core.ast
    }

    pub fn last_command(&self) -> Option<&str> {
        self.core.last_command.as_deref()
    }

    /// True while a command is gathering arguments.
    pub fn in_progress(&self) -> bool {
        !self.stack.is_empty()
    }

    pub fn stack_depth(&self) -> usize {
        self.stack.len()
    }

    pub fn pending(&self) -> Option<&PendingAsk> {
        self.core.pending.as_ref()
    }

    /// Command id of the request most recently dispatched at top level.
    pub fn last_dispatched(&self) -> Option<&str> {
        self.last_request.as_ref().map(|(_, id)| id.as_str())
    }

    /// Loads a CSV under `name` before the conversation starts; the export
    /// begins with the matching load.
    pub fn preload(&mut self, name: &str, path: &str) -> Result<(), String> {
        let ctx = self.core.engine.config().exec_ctx(0);
        let c = crate::stats::table::load_csv(&ctx.resolve(path)).map_err(|e| e.to_string())?;
        let name = normalize_name(name);
        self.core
            .env
            .bind(&name, Value::Collection(c))
            .map_err(|e| e.to_string())?;
        self.core.ast.preloads.push((name, path.to_string()));
        Ok(())
    }

    /// Binds a value directly, outside the conversation.
    pub fn bind(&mut self, name: &str, value: Value) -> Result<(), String> {
        self.core
            .env
            .bind(&normalize_name(name), value)
            .map_err(|e| e.to_string())
    }

    pub fn env_snapshot(&self) -> Vec<EnvVar> {
        self.core
            .env
            .bindings()
            .map(|(name, v)| EnvVar {
                name: name.to_string(),
                type_name: v.type_name().to_string(),
                preview: v.preview(),
            })
            .collect()
    }

    /// Top hints for a draft; an empty draft ranks every command.
    pub fn hints(&self, partial: &str) -> HintReply {
        let k = if partial.trim().is_empty() {
            self.core.engine.commands().len()
        } else {
            HINT_COUNT
        };
        HintReply {
            ranked: self.core.engine.hints(partial, &self.core.env, k),
            pending: self.core.pending.clone(),
        }
    }

    pub fn export_script(&self) -> Result<String, CodegenError> {
        export_script(&self.core.ast, self.core.engine.commands(), &ReferenceRenderer)
    }

    /// Runs one user turn.
    pub fn handle_input(&mut self, text: &str) -> Vec<AgentResponse> {
        self.core.outbox.clear();
        self.core.turn += 1;
        let text = text.trim();
        if text.is_empty() {
            self.core.error("Please type a request.");
            return self.finish_turn();
        }
        if ABORT_PHRASES.contains(&normalize_phrase(text).as_str()) {
            if self.in_progress() {
                self.abort();
                self.core.say("Okay, I've cancelled that.");
            } else {
                self.core.say("There's nothing to cancel.");
            }
            return self.finish_turn();
        }
        if let Some(meant) = correction(text) {
            if self.in_progress() {
                self.abort();
            }
            let target = self.core.engine.classify_in(&meant, &self.core.env);
            if let Some((previous, id)) = self.last_request.clone() {
                if id != target.id {
                    let masked = mask_names(&previous, &self.core.env);
                    match self.core.engine.add_example(&masked, &target.id) {
                        Ok(()) => self.core.say(format!(
                            "Got it. Next time \"{previous}\" will {}.",
                            target.intro.trim_end_matches('.')
                        )),
                        Err(e) => self.core.error(e.to_string()),
                    }
                }
            }
            self.dispatch(&meant);
            return self.finish_turn();
        }
        if self.in_progress() {
            let out = self.stack.run(&mut self.core, Some(text));
            self.settle(out);
        } else {
            self.dispatch(text);
        }
        self.finish_turn()
    }

    fn dispatch(&mut self, text: &str) {
        let cmd = self.core.engine.classify_in(text, &self.core.env);
        self.last_request = Some((text.to_string(), cmd.id.clone()));
        self.snapshot = Some(self.core.snapshot());
        let def = self.core.engine.machine(&cmd.id).expect("every command has a machine");
        let inv = self.core.new_invocation(cmd, text);
        self.core.frames.push(inv);
        self.stack.clear();
        let out = self
            .stack
            .push(MachineInstance::new(def))
            .and_then(|_| self.stack.run(&mut self.core, None));
        self.settle(out);
    }

    fn settle(&mut self, out: Result<StackOutcome, MachineError>) {
        match out {
            Ok(StackOutcome::Waiting(_)) => {}
            Ok(StackOutcome::Finished(_)) => {
                self.snapshot = None;
                self.core.frames.clear();
                self.core.pending = None;
            }
            Ok(StackOutcome::Failed(_)) => self.abort(),
            Err(e) => {
                self.core.error(format!("Something went wrong: {e}"));
                self.abort();
            }
        }
    }

    fn abort(&mut self) {
        self.stack.clear();
        match self.snapshot.take() {
            Some(s) => self.core.restore(s),
            None => {
                self.core.frames.clear();
                self.core.pending = None;
            }
        }
    }

    fn finish_turn(&mut self) -> Vec<AgentResponse> {
        if self.stack.is_empty() {
            self.core.pending = None;
        }
        std::mem::take(&mut self.core.outbox)
    }

    /// The scope of the innermost machine; exposed for isolation checks.
    pub fn top_scope(&self) -> Option<&Scope> {
        self.stack.top().map(|m| m.scope())
    }
}
