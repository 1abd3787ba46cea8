//! Intent classifier: multinomial logistic regression over binary unigram and
//! bigram features, retrained from scratch whenever an example is added.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::Origin;
use crate::text::{is_numeral, tokenize};

/// Marks a removed slot in training text; no bigram crosses it.
pub const SLOT_GAP: &str = "|";
pub const NUM: &str = "NUM";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntentError {
    #[error("unknown command '{0}'")]
    UnknownCommand(String),
    #[error("no training examples")]
    EmptyStore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainWarning {
    /// The same utterance was filed under several commands; the last row wins.
    DegenerateStore { utterance: String, commands: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            l2: 1e-3,
            lr: 1.0,
            epochs: 200,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub utterance: String,
    pub command_id: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleStore {
    rows: Vec<ExampleRow>,
    version: u64,
}

impl ExampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, utterance: &str, command_id: &str, origin: Origin) {
        self.rows.push(ExampleRow {
            utterance: utterance.to_string(),
            command_id: command_id.to_string(),
            origin,
        });
        self.version += 1;
    }

    pub fn rows(&self) -> &[ExampleRow] {
        &self.rows
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Sorted, de-duplicated feature names: unigrams and bigrams, numerals folded
/// to `NUM`.
pub fn featurize(text: &str) -> Vec<String> {
    let words: Vec<String> = tokenize(text)
        .into_iter()
        .map(|t| if is_numeral(&t.norm) { NUM.to_string() } else { t.norm })
        .collect();
    let mut feats = BTreeSet::new();
    for w in &words {
        if w != SLOT_GAP {
            feats.insert(w.clone());
        }
    }
    for pair in words.windows(2) {
        if pair[0] != SLOT_GAP && pair[1] != SLOT_GAP {
            feats.insert(format!("{}_{}", pair[0], pair[1]));
        }
    }
    feats.into_iter().collect()
}

fn key(text: &str) -> String {
    featurize(text).join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentModel {
    vocab: HashMap<String, usize>,
    commands: Vec<String>,
    /// Feature-major: `weights[feature][command]`.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    pub hyperparams: Hyperparams,
}

impl IntentModel {
    /// Fits the model. `commands` is the full registered set; rows naming
    /// anything else are rejected.
    pub fn train(
        store: &ExampleStore,
        commands: &[String],
        hp: Hyperparams,
    ) -> Result<(IntentModel, Vec<TrainWarning>), IntentError> {
        if store.is_empty() || commands.is_empty() {
            return Err(IntentError::EmptyStore);
        }
        let mut cmds: Vec<String> = commands.to_vec();
        cmds.sort();
        cmds.dedup();
        let cmd_index: HashMap<&str, usize> = cmds.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

        // last row wins for identical utterances
        let mut latest: HashMap<String, usize> = HashMap::new();
        let mut owners: HashMap<String, BTreeSet<String>> = HashMap::new();
        for (i, row) in store.rows().iter().enumerate() {
            if !cmd_index.contains_key(row.command_id.as_str()) {
                return Err(IntentError::UnknownCommand(row.command_id.clone()));
            }
            let k = key(&row.utterance);
            latest.insert(k.clone(), i);
            owners.entry(k).or_default().insert(row.command_id.clone());
        }
        let mut warnings: Vec<TrainWarning> = owners
            .iter()
            .filter(|(_, c)| c.len() > 1)
            .map(|(k, c)| TrainWarning::DegenerateStore {
                utterance: k.clone(),
                commands: c.iter().cloned().collect(),
            })
            .collect();
        warnings.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));

        let mut vocab: HashMap<String, usize> = HashMap::new();
        let mut data: Vec<(Vec<usize>, usize)> = Vec::new();
        for (i, row) in store.rows().iter().enumerate() {
            if latest.get(&key(&row.utterance)) != Some(&i) {
                continue;
            }
            let feats = featurize(&row.utterance)
                .into_iter()
                .map(|f| {
                    let next = vocab.len();
                    *vocab.entry(f).or_insert(next)
                })
                .collect();
            data.push((feats, cmd_index[row.command_id.as_str()]));
        }

        let (k, d, n) = (cmds.len(), vocab.len(), data.len() as f64);
        let mut w = vec![vec![0.0; k]; d];
        let mut b = vec![0.0; k];
        let mut probs = vec![0.0; k];
        for _ in 0..hp.epochs {
            let mut gw = vec![vec![0.0; k]; d];
            let mut gb = vec![0.0; k];
            for (feats, y) in &data {
                probs.copy_from_slice(&b);
                for &f in feats {
                    for (p, wf) in probs.iter_mut().zip(&w[f]) {
                        *p += wf;
                    }
                }
                softmax(&mut probs);
                probs[*y] -= 1.0;
                for (g, p) in gb.iter_mut().zip(&probs) {
                    *g += p / n;
                }
                for &f in feats {
                    for (g, p) in gw[f].iter_mut().zip(&probs) {
                        *g += p / n;
                    }
                }
            }
            for c in 0..k {
                b[c] -= hp.lr * gb[c];
            }
            for (wf, gf) in w.iter_mut().zip(&gw) {
                for c in 0..k {
                    wf[c] -= hp.lr * (gf[c] + hp.l2 * wf[c]);
                }
            }
        }
        Ok((
            IntentModel {
                vocab,
                commands: cmds,
                weights: w,
                bias: b,
                hyperparams: hp,
            },
            warnings,
        ))
    }

    pub fn commands(&self) -> &[String] {
        &self.commands
    }

    /// Softmax over all commands.
    pub fn scores(&self, utterance: &str) -> Vec<f64> {
        let mut s = self.bias.clone();
        for f in featurize(utterance) {
            if let Some(&j) = self.vocab.get(&f) {
                for (p, wf) in s.iter_mut().zip(&self.weights[j]) {
                    *p += wf;
                }
            }
        }
        softmax(&mut s);
        s
    }

    /// Commands by descending score, ties by command id; at most `k`.
    pub fn predict_topk(&self, utterance: &str, k: usize) -> Vec<(String, f64)> {
        let scores = self.scores(utterance);
        let mut ranked: Vec<(String, f64)> = self.commands.iter().cloned().zip(scores).collect();
        // commands are already sorted by id, so a stable sort keeps id order on ties
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked.truncate(k.max(1));
        ranked
    }

    /// Whether any feature of `utterance` was seen in training.
    pub fn knows_any(&self, utterance: &str) -> bool {
        featurize(utterance).iter().any(|f| self.vocab.contains_key(f))
    }

    pub fn top1(&self, utterance: &str) -> String {
        self.predict_topk(utterance, 1).remove(0).0
    }
}

fn softmax(s: &mut [f64]) {
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in s.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in s.iter_mut() {
        *x /= sum;
    }
}
