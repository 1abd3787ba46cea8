//! Word-category lexicons and per-document category counts.

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;

use super::StatsError;
use crate::text::tokenize;
use crate::value::{Collection, Column};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    /// Category → lowercase words, in declaration order.
    pub categories: IndexMap<String, HashSet<String>>,
}

impl Lexicon {
    /// Parses `category<TAB>word` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Lexicon, StatsError> {
        let mut lex = Lexicon::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (cat, word) = line
                .split_once('\t')
                .ok_or_else(|| StatsError::Malformed(format!("lexicon line {} has no tab", n + 1)))?;
            let (cat, word) = (cat.trim(), word.trim());
            if cat.is_empty() || word.is_empty() {
                return Err(StatsError::Malformed(format!("lexicon line {} is incomplete", n + 1)));
            }
            lex.categories
                .entry(cat.to_string())
                .or_default()
                .insert(word.to_lowercase());
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Lexicon, StatsError> {
        let text = std::fs::read_to_string(path).map_err(|e| StatsError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Lexicon::parse(&text)
    }
}

/// One numeric column per category counting each document's tokens that
/// belong to it.
pub fn lexicon_counts(documents: &[String], lex: &Lexicon) -> Result<Collection, StatsError> {
    if lex.categories.is_empty() {
        return Err(StatsError::EmptyLexicon);
    }
    let docs: Vec<Vec<String>> = documents
        .iter()
        .map(|d| tokenize(d).into_iter().map(|t| t.norm).collect())
        .collect();
    let columns = lex
        .categories
        .iter()
        .map(|(cat, words)| {
            let counts = docs
                .iter()
                .map(|toks| toks.iter().filter(|t| words.contains(*t)).count() as f64)
                .collect();
            (cat.clone(), Column::Numeric(counts))
        })
        .collect();
    Collection::new(columns).map_err(|e| StatsError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let lex = Lexicon::parse("animal\tcat\nanimal\tdog\nplant\ttree\n").unwrap();
        let docs = vec!["cat dog".to_string(), "dog dog".to_string(), String::new()];
        let c = lexicon_counts(&docs, &lex).unwrap();
        assert_eq!(c.column("animal"), Some(&Column::Numeric(vec![2.0, 2.0, 0.0])));
        assert_eq!(c.column("plant"), Some(&Column::Numeric(vec![0.0, 0.0, 0.0])));
        assert_eq!(c.names(), vec!["animal", "plant"]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            lexicon_counts(&[], &Lexicon::default()).unwrap_err(),
            StatsError::EmptyLexicon
        );
        assert!(matches!(Lexicon::parse("oops"), Err(StatsError::Malformed(_))));
    }
}
