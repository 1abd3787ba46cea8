//! Shared tokenizer for templates, argument spans and the intent classifier.

/// One whitespace-delimited word with trailing `?.,!` removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Original casing, used when a span becomes an argument value.
    pub raw: String,
    /// Lowercased form, used for matching.
    pub norm: String,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .filter_map(|word| {
            let raw = word.trim_end_matches(['?', '.', ',', '!']);
            if raw.is_empty() {
                None
            } else {
                Some(Token {
                    raw: raw.to_string(),
                    norm: raw.to_lowercase(),
                })
            }
        })
        .collect()
}

pub fn norms(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.norm.as_str()).collect()
}

/// Joins the raw forms of `tokens[start..end]` with single spaces.
pub fn span_text(tokens: &[Token], start: usize, end: usize) -> String {
    tokens[start..end]
        .iter()
        .map(|t| t.raw.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// True for tokens that read as a finite number, e.g. `7`, `-2.5`, `1e3`.
pub fn is_numeral(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit())
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))
        && token.parse::<f64>().is_ok_and(f64::is_finite)
}
