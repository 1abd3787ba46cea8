//! State shared by every session: the command registry, the type registry,
//! learned templates and option synonyms, the example store and the current
//! intent model snapshot.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{MachineDef, DEFAULT_DEPTH_CAP};
use crate::command::{
    learn_template, CommandRegistry, CommandSpec, ExecCtx, Extraction, Origin, SlotSynonyms, Template,
};
use crate::env::Environment;
use crate::intent::{ExampleRow, ExampleStore, Hyperparams, IntentError, IntentModel, TrainWarning, SLOT_GAP};
use crate::session::{build_machine, SessionCore};
use crate::text::{tokenize, Token};
use crate::types::{render_literal, TypeRegistry};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("the command registry is empty")]
    EmptyRegistry,
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error("unknown command '{0}'")]
    UnknownCommand(String),
    #[error("command '{command}' has a bad machine: {reason}")]
    Machine { command: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path} line {line}: {reason}")]
    Sidecar { path: String, line: usize, reason: String },
}

/// Engine settings; the CLI fills these from its config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub hyperparams: Hyperparams,
    pub data_dir: PathBuf,
    pub lexicon: PathBuf,
    pub alpha: f64,
    /// Skip the conversion dialogue when only one option exists.
    pub auto_single_option: bool,
    pub depth_cap: usize,
    /// Learn templates and examples from novel requests.
    pub learning: bool,
    pub templates_path: Option<PathBuf>,
    pub examples_path: Option<PathBuf>,
    pub synonyms_path: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let ctx = ExecCtx::default();
        EngineConfig {
            hyperparams: Hyperparams::default(),
            data_dir: ctx.data_dir,
            lexicon: ctx.lexicon,
            alpha: ctx.alpha,
            auto_single_option: false,
            depth_cap: DEFAULT_DEPTH_CAP,
            learning: true,
            templates_path: None,
            examples_path: None,
            synonyms_path: None,
        }
    }
}

impl EngineConfig {
    pub fn exec_ctx(&self, seed: u64) -> ExecCtx {
        ExecCtx {
            seed,
            data_dir: self.data_dir.clone(),
            alpha: self.alpha,
            lexicon: self.lexicon.clone(),
        }
    }
}

/// Learned-template sidecar line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub command_id: String,
    pub template: Vec<String>,
    pub origin: Origin,
}

/// Option-synonym sidecar line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynonymRecord {
    pub command_id: String,
    pub slot: String,
    pub phrase: String,
    pub label: String,
}

/// One entry of the hint box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hint {
    pub command_id: String,
    pub hint_text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub commands: usize,
    pub examples: usize,
    pub problems: Vec<String>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

pub struct Engine {
    types: TypeRegistry,
    commands: CommandRegistry,
    config: EngineConfig,
    machines: HashMap<String, Arc<MachineDef<SessionCore>>>,
    learned: RwLock<HashMap<String, Vec<Template>>>,
    synonyms: RwLock<HashMap<String, IndexMap<String, SlotSynonyms>>>,
    store: Mutex<ExampleStore>,
    model: RwLock<Arc<IntentModel>>,
    warnings: Mutex<Vec<TrainWarning>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("commands", &self.commands.len())
            .field("config", &self.config)
            .finish()
    }
}

fn io_err(path: &Path, e: impl ToString) -> EngineError {
    EngineError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EngineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EngineError::Sidecar {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn append_record<T: Serialize>(path: &Path, record: &T) -> Result<(), EngineError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let line = serde_json::to_string(record).expect("records serialize");
    writeln!(f, "{line}").map_err(|e| io_err(path, e))
}

/// Longest run of words, joined by underscores, that names a variable.
const MAX_NAME_WORDS: usize = 4;

/// Replaces words that name bound variables with the slot gap, the way
/// slots read in training text.
pub fn mask_names(text: &str, env: &Environment) -> String {
    let tokens = tokenize(text);
    let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let hit = (1..=MAX_NAME_WORDS.min(tokens.len() - i)).rev().find(|&n| {
            let name = tokens[i..i + n]
                .iter()
                .map(|t| t.norm.as_str())
                .collect::<Vec<_>>()
                .join("_");
            env.get(&name).is_some()
        });
        match hit {
            Some(n) => {
                out.push(SLOT_GAP);
                i += n;
            }
            None => {
                out.push(&tokens[i].raw);
                i += 1;
            }
        }
    }
    out.join(" ")
}

impl Engine {
    /// Builds the engine, replays any sidecar files and trains the first
    /// model.
    pub fn new(commands: CommandRegistry, config: EngineConfig) -> Result<Engine, EngineError> {
        if commands.is_empty() {
            return Err(EngineError::EmptyRegistry);
        }
        let types = TypeRegistry::builtin();
        let mut machines = HashMap::new();
        for cmd in commands.iter() {
            let def = build_machine(cmd.clone()).map_err(|e| EngineError::Machine {
                command: cmd.id.clone(),
                reason: e.to_string(),
            })?;
            machines.insert(cmd.id.clone(), def);
        }
        let mut store = ExampleStore::new();
        for cmd in commands.iter() {
            for t in cmd.templates() {
                store.push(&t.training_text(), &cmd.id, Origin::Authored);
            }
        }
        let mut learned: HashMap<String, Vec<Template>> = HashMap::new();
        if let Some(p) = &config.templates_path {
            for r in read_records::<TemplateRecord>(p)? {
                if commands.get(&r.command_id).is_none() {
                    return Err(EngineError::UnknownCommand(r.command_id));
                }
                let tpl = Template::parse(&r.template.join(" "), Origin::Learned);
                let list = learned.entry(r.command_id).or_default();
                if !list.contains(&tpl) {
                    list.push(tpl);
                }
            }
        }
        if let Some(p) = &config.examples_path {
            for r in read_records::<ExampleRow>(p)? {
                store.push(&r.utterance, &r.command_id, r.origin);
            }
        }
        let mut synonyms: HashMap<String, IndexMap<String, SlotSynonyms>> = HashMap::new();
        if let Some(p) = &config.synonyms_path {
            for r in read_records::<SynonymRecord>(p)? {
                synonyms
                    .entry(r.command_id)
                    .or_default()
                    .entry(r.slot)
                    .or_default()
                    .insert(r.phrase, r.label);
            }
        }
        let (model, warnings) = IntentModel::train(&store, &commands.ids(), config.hyperparams)?;
        for w in &warnings {
            log::warn!("{w:?}");
        }
        Ok(Engine {
            types,
            commands,
            config,
            machines,
            learned: RwLock::new(learned),
            synonyms: RwLock::new(synonyms),
            store: Mutex::new(store),
            model: RwLock::new(Arc::new(model)),
            warnings: Mutex::new(warnings),
        })
    }

    /// The shipped pack with the given settings.
    pub fn with_pack(config: EngineConfig) -> Result<Engine, EngineError> {
        Engine::new(crate::pack::datasci_pack(), config)
    }

    pub fn types(&self) -> &TypeRegistry {
        &self.types
    }

    pub fn commands(&self) -> &CommandRegistry {
        &self.commands
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn command(&self, id: &str) -> Option<Arc<CommandSpec>> {
        self.commands.get(id).cloned()
    }

    pub fn machine(&self, id: &str) -> Option<Arc<MachineDef<SessionCore>>> {
        self.machines.get(id).cloned()
    }

    /// Current model snapshot.
    pub fn model(&self) -> Arc<IntentModel> {
        self.model.read().clone()
    }

    pub fn warnings(&self) -> Vec<TrainWarning> {
        self.warnings.lock().clone()
    }

    pub fn store_rows(&self) -> Vec<ExampleRow> {
        self.store.lock().rows().to_vec()
    }

    pub fn store_version(&self) -> u64 {
        self.store.lock().version()
    }

    /// The command a request would run.
    pub fn classify(&self, text: &str) -> Arc<CommandSpec> {
        let id = self.model().top1(text);
        self.commands
            .get(&id)
            .cloned()
            .expect("model only predicts registered commands")
    }

    /// `classify` with the session's variable names blanked out.
    pub fn classify_in(&self, text: &str, env: &Environment) -> Arc<CommandSpec> {
        self.classify(&mask_names(text, env))
    }

    /// Whether any feature of `text`, names blanked, was seen in training.
    pub fn recognizes(&self, text: &str, env: &Environment) -> bool {
        self.model().knows_any(&mask_names(text, env))
    }

    pub fn learned_templates(&self, id: &str) -> Vec<Template> {
        self.learned.read().get(id).cloned().unwrap_or_default()
    }

    pub fn synonyms(&self, id: &str) -> IndexMap<String, SlotSynonyms> {
        self.synonyms.read().get(id).cloned().unwrap_or_default()
    }

    /// Matches authored then learned templates against a snapshot of the
    /// learned state.
    pub fn extract(&self, cmd: &CommandSpec, tokens: &[Token], env: &Environment) -> Extraction {
        let learned = self.learned_templates(&cmd.id);
        let synonyms = self.synonyms(&cmd.id);
        cmd.extract_arguments(&self.types, &learned, tokens, env, &synonyms)
    }

    /// Learns a template from a novel request. Returns it when new.
    pub fn learn_template(&self, id: &str, tokens: &[Token], resolved: &[(String, String)]) -> Option<Template> {
        let cmd = self.commands.get(id)?;
        let mut learned = self.learned.write();
        let list = learned.entry(id.to_string()).or_default();
        let existing: Vec<Template> = cmd.templates().iter().chain(list.iter()).cloned().collect();
        let tpl = learn_template(&existing, tokens, resolved)?;
        list.push(tpl.clone());
        if let Some(p) = &self.config.templates_path {
            let record = TemplateRecord {
                command_id: id.to_string(),
                template: tpl.to_string().split(' ').map(str::to_string).collect(),
                origin: Origin::Learned,
            };
            if let Err(e) = append_record(p, &record) {
                log::warn!("could not persist template: {e}");
            }
        }
        Some(tpl)
    }

    /// Appends a row, retrains and swaps the model snapshot.
    pub fn add_example(&self, utterance: &str, id: &str) -> Result<(), EngineError> {
        if self.commands.get(id).is_none() {
            return Err(IntentError::UnknownCommand(id.to_string()).into());
        }
        let mut store = self.store.lock();
        store.push(utterance, id, Origin::Learned);
        let (model, warnings) = IntentModel::train(&store, &self.commands.ids(), self.config.hyperparams)?;
        *self.model.write() = Arc::new(model);
        *self.warnings.lock() = warnings;
        if let Some(p) = &self.config.examples_path {
            let row = ExampleRow {
                utterance: utterance.to_string(),
                command_id: id.to_string(),
                origin: Origin::Learned,
            };
            append_record(p, &row)?;
        }
        Ok(())
    }

    /// Remembers that `phrase` means `label` for this slot; the last choice wins.
    pub fn record_option_synonym(&self, id: &str, slot: &str, phrase: &str, label: &str) {
        let phrase = phrase.trim().to_lowercase();
        if phrase.is_empty() {
            return;
        }
        self.synonyms
            .write()
            .entry(id.to_string())
            .or_default()
            .entry(slot.to_string())
            .or_default()
            .insert(phrase.clone(), label.to_string());
        if let Some(p) = &self.config.synonyms_path {
            let record = SynonymRecord {
                command_id: id.to_string(),
                slot: slot.to_string(),
                phrase,
                label: label.to_string(),
            };
            if let Err(e) = append_record(p, &record) {
                log::warn!("could not persist synonym: {e}");
            }
        }
    }

    /// Top-`k` commands for a draft, titles filled with whatever the draft
    /// already supplies. Reads only.
    pub fn hints(&self, text: &str, env: &Environment, k: usize) -> Vec<Hint> {
        let tokens = tokenize(text);
        self.model()
            .predict_topk(&mask_names(text, env), k)
            .into_iter()
            .map(|(id, score)| {
                let cmd = &self.commands.get(&id).expect("registered");
                let ext = self.extract(cmd, &tokens, env);
                let partial: IndexMap<String, String> = ext
                    .bound
                    .iter()
                    .chain(ext.mismatched.iter())
                    .map(|(slot, e)| (slot.clone(), e.text.clone()))
                    .collect();
                Hint {
                    command_id: id,
                    hint_text: cmd.render_title_hint(&partial),
                    score,
                }
            })
            .collect()
    }

    /// Checks the registry: pack floors, classifier memorization, and that
    /// every authored example resolves literal slot values.
    pub fn selftest(&self) -> SelfTestReport {
        let mut report = SelfTestReport {
            commands: self.commands.len(),
            examples: self.commands.iter().map(|c| c.examples.len()).sum(),
            problems: crate::pack::check_pack(&self.commands),
        };
        let model = self.model();
        for row in self.store.lock().rows() {
            let got = model.top1(&row.utterance);
            if got != row.command_id {
                report.problems.push(format!(
                    "'{}' classifies as {got}, not {}",
                    row.utterance, row.command_id
                ));
            }
        }
        let env = Environment::new();
        for cmd in self.commands.iter() {
            for tpl in cmd.templates() {
                let mut expected = Vec::new();
                let words: Vec<String> = tpl
                    .tokens
                    .iter()
                    .map(|t| match t {
                        crate::command::TemplateToken::Literal(w) => w.clone(),
                        crate::command::TemplateToken::Slot(s) => {
                            let arg = cmd.arg(s).expect("validated at build");
                            match sample_literal(arg.options.first(), &arg.type_name) {
                                Some((text, v)) => {
                                    expected.push((s.clone(), v));
                                    text
                                }
                                None => "zzz".to_string(),
                            }
                        }
                    })
                    .collect();
                let ext = self.extract(cmd, &tokenize(&words.join(" ")), &env);
                for (slot, v) in expected {
                    if ext.bound.get(&slot).map(|e| &e.value) != Some(&v) {
                        report.problems.push(format!(
                            "'{}' for {}: slot {slot} did not resolve to {}",
                            tpl,
                            cmd.id,
                            render_literal(&v).unwrap_or_default()
                        ));
                    }
                }
            }
        }
        report
    }
}

/// A one-token literal for a slot type, and the value it should parse to.
fn sample_literal(option: Option<&String>, type_name: &str) -> Option<(String, Value)> {
    if let Some(label) = option {
        return Some((label.clone(), Value::Text(label.clone())));
    }
    match type_name {
        "Int" => Some(("5".into(), Value::Int(5))),
        "Real" => Some(("2.5".into(), Value::Real(2.5))),
        "String" => Some(("score".into(), Value::Text("score".into()))),
        "Array" => Some(("[1,2]".into(), Value::array(vec![1.0, 2.0]).ok()?)),
        _ => None,
    }
}
