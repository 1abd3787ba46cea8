//! Conversational types.
//!
//! A type knows which values it accepts, how to read a literal of itself
//! out of user text, what to ask when an argument of that type is missing,
//! and which converters can turn a value of another type into one of its own
//! through a short dialogue.

use indexmap::IndexMap;
use thiserror::Error;

use crate::env::{is_pronoun, normalize_name, Environment};
use crate::value::{fmt_array, fmt_real, Value};

/// The seven types every command pack can rely on.
pub const CORE_TYPES: [&str; 7] = ["Int", "String", "Array", "Collection", "Model", "Metric", "Plot"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("no conversion from {source_type} to {target}")]
    NoConverter { source_type: String, target: String },
    #[error("'{0}' is not one of the offered options")]
    BadChoice(String),
    #[error("unknown type '{0}'")]
    UnknownType(String),
    #[error("{0}")]
    Conversion(String),
}

/// Where a parsed argument value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgOrigin {
    Literal,
    Var(String),
    /// Index into the session history.
    History(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    Direct(Value, ArgOrigin),
    /// The text named a value, but of the wrong type.
    Mismatch(Value, ArgOrigin),
    NoParse,
}

pub type ChoicesFn = fn(&Value) -> Vec<String>;
pub type ApplyFn = fn(&Value, &str) -> Result<Value, TypeError>;

#[derive(Debug, Clone)]
pub struct Converter {
    pub accepts: &'static str,
    /// Command that performs the same conversion as a call taking the
    /// chosen label and then the source value; used when recording the AST.
    pub via: &'static str,
    pub needs_choice: bool,
    pub question: &'static str,
    /// Shown once the user agrees to convert, before the choice is asked.
    pub describe: fn(&Value) -> String,
    pub choice_question: &'static str,
    pub choices: ChoicesFn,
    pub apply: ApplyFn,
}

#[derive(Debug, Clone)]
pub struct ConvType {
    pub name: &'static str,
    pub matches: fn(&Value) -> bool,
    pub literal: fn(&str) -> Option<Value>,
    /// Default clarification question; `{arg}` is replaced by the argument name.
    pub question: &'static str,
    pub converters: Vec<Converter>,
}

impl ConvType {
    pub fn question_for(&self, arg: &str) -> String {
        self.question.replace("{arg}", &arg.replace('_', " "))
    }

    /// Literal, then named variable, then pronoun; first hit wins.
    pub fn parse_input(&self, text: &str, env: &Environment) -> ParseOutcome {
        let text = text.trim();
        if text.is_empty() {
            return ParseOutcome::NoParse;
        }
        if let Some(v) = (self.literal)(text) {
            return ParseOutcome::Direct(v, ArgOrigin::Literal);
        }
        let name = normalize_name(strip_article(text));
        if let Some(v) = env.get(&name) {
            return self.classify(v.clone(), ArgOrigin::Var(name));
        }
        if is_pronoun_phrase(text) {
            if let (Some(v), Some(idx)) = (env.history().last(), env.last_index()) {
                return self.classify(v.value.clone(), ArgOrigin::History(idx));
            }
        }
        ParseOutcome::NoParse
    }

    fn classify(&self, v: Value, origin: ArgOrigin) -> ParseOutcome {
        if (self.matches)(&v) {
            ParseOutcome::Direct(v, origin)
        } else {
            ParseOutcome::Mismatch(v, origin)
        }
    }
}

/// "that", or a short phrase led by one: "those data", "that array".
pub fn is_pronoun_phrase(text: &str) -> bool {
    let words: Vec<&str> = text.split_whitespace().collect();
    !words.is_empty() && words.len() <= 3 && is_pronoun(words[0])
}

fn strip_article(text: &str) -> &str {
    let lower = text.to_lowercase();
    if lower.starts_with("the ") {
        text[4..].trim_start()
    } else {
        text
    }
}

/// A pending conversion: which converter to run and what to ask.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionPlan {
    pub target: String,
    pub source: String,
    pub converter: usize,
    /// Command equivalent to the conversion, see [`Converter::via`].
    pub via: String,
    pub prompt: String,
    pub options: Vec<String>,
    pub needs_choice: bool,
}

pub fn with_article(word: &str) -> String {
    let vowel = word.chars().next().is_some_and(|c| "AEIOUaeiou".contains(c));
    if vowel {
        format!("an {word}")
    } else {
        format!("a {word}")
    }
}

/// Canonical text form; `parse_input` reads it back for literal types.
pub fn render_literal(v: &Value) -> Option<String> {
    match v {
        Value::Int(i) => Some(i.to_string()),
        Value::Real(r) => Some(fmt_real(*r)),
        Value::Text(s) => Some(s.clone()),
        Value::Array(a) => Some(fmt_array(a.as_slice(), usize::MAX)),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct TypeRegistry {
    types: IndexMap<&'static str, ConvType>,
}

impl Default for TypeRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TypeRegistry {
    pub fn builtin() -> Self {
        let mut types = IndexMap::new();
        for t in [
            ConvType {
                name: "Int",
                matches: |v| matches!(v, Value::Int(_)),
                literal: parse_int,
                question: "What integer should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "String",
                matches: |v| matches!(v, Value::Text(_)),
                literal: |t| Some(Value::Text(t.to_string())),
                question: "What should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Array",
                matches: |v| matches!(v, Value::Array(_)),
                literal: parse_array,
                question: "What array should I use for {arg}?",
                converters: vec![Converter {
                    accepts: "Collection",
                    via: "select_column",
                    needs_choice: true,
                    question: "Would you like to use a column from the Collection as an array?",
                    describe: |v| match v {
                        Value::Collection(c) => {
                            format!(
                                "Here are the columns in that collection:\n{}",
                                crate::value::fmt_name_row(&c.names())
                            )
                        }
                        _ => String::new(),
                    },
                    choice_question: "Which column would you like to select to use as an array?",
                    choices: |v| match v {
                        Value::Collection(c) => c.numeric_names(),
                        _ => Vec::new(),
                    },
                    apply: |v, choice| match v {
                        Value::Collection(c) => match c.column(choice) {
                            Some(crate::value::Column::Numeric(xs)) => {
                                Value::array(xs.clone()).map_err(|e| TypeError::Conversion(e.to_string()))
                            }
                            _ => Err(TypeError::BadChoice(choice.to_string())),
                        },
                        _ => Err(TypeError::Conversion("expected a Collection".into())),
                    },
                }],
            },
            ConvType {
                name: "Collection",
                matches: |v| matches!(v, Value::Collection(_)),
                literal: |_| None,
                question: "Which collection should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Model",
                matches: |v| matches!(v, Value::Model(_)),
                literal: |_| None,
                question: "Which model should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Metric",
                matches: |v| matches!(v, Value::Metric(_)),
                literal: |_| None,
                question: "Which metric should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Plot",
                matches: |v| matches!(v, Value::Plot(_)),
                literal: |_| None,
                question: "Which plot should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Real",
                matches: |v| matches!(v, Value::Real(_) | Value::Int(_)),
                literal: parse_real,
                question: "What number should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Any",
                matches: |v| !matches!(v, Value::Unit),
                literal: |t| parse_int(t).or_else(|| parse_real(t)).or_else(|| parse_array(t)),
                question: "What value should I use for {arg}?",
                converters: Vec::new(),
            },
            ConvType {
                name: "Unit",
                matches: |v| matches!(v, Value::Unit),
                literal: |_| None,
                question: "Nothing is needed for {arg}.",
                converters: Vec::new(),
            },
        ] {
            types.insert(t.name, t);
        }
        TypeRegistry { types }
    }

    pub fn get(&self, name: &str) -> Result<&ConvType, TypeError> {
        self.types
            .get(name)
            .ok_or_else(|| TypeError::UnknownType(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.types.keys().copied().collect()
    }

    /// Whether `v` fits `target` directly or through some converter.
    pub fn accepts(&self, target: &str, v: &Value) -> bool {
        match self.get(target) {
            Ok(t) => (t.matches)(v) || self.plan_conversion(target, v).is_ok(),
            Err(_) => false,
        }
    }

    /// Same question for a type name instead of a value; used to vet nested
    /// commands before they run.
    pub fn accepts_type(&self, target: &str, source: &str) -> bool {
        match self.get(target) {
            Ok(t) => {
                target == source
                    || target == "Any" && source != "Unit"
                    || source == "Any" && target != "Unit"
                    || target == "Real" && source == "Int"
                    || t.converters.iter().any(|c| c.accepts == source)
            }
            Err(_) => false,
        }
    }

    pub fn plan_conversion(&self, target: &str, v: &Value) -> Result<ConversionPlan, TypeError> {
        let t = self.get(target)?;
        let source = v.type_name();
        let none = || TypeError::NoConverter {
            source_type: source.to_string(),
            target: target.to_string(),
        };
        let (idx, conv) = t
            .converters
            .iter()
            .enumerate()
            .find(|(_, c)| c.accepts == source)
            .ok_or_else(none)?;
        let options = if conv.needs_choice {
            (conv.choices)(v)
        } else {
            Vec::new()
        };
        if conv.needs_choice && options.is_empty() {
            return Err(none());
        }
        Ok(ConversionPlan {
            target: target.to_string(),
            source: source.to_string(),
            converter: idx,
            via: conv.via.to_string(),
            prompt: format!(
                "I need {} but you've given me {}. {}",
                with_article(target),
                with_article(source),
                conv.question
            ),
            options,
            needs_choice: conv.needs_choice,
        })
    }

    /// Runs the planned converter. `choice` is matched case-insensitively
    /// against the offered options.
    pub fn apply_conversion(&self, plan: &ConversionPlan, choice: &str, v: &Value) -> Result<Value, TypeError> {
        let t = self.get(&plan.target)?;
        let conv = t
            .converters
            .get(plan.converter)
            .ok_or_else(|| TypeError::Conversion("stale conversion plan".into()))?;
        let label = if plan.needs_choice {
            resolve_option(&plan.options, choice).ok_or_else(|| TypeError::BadChoice(choice.to_string()))?
        } else {
            String::new()
        };
        let out = (conv.apply)(v, &label)?;
        debug_assert!((t.matches)(&out));
        Ok(out)
    }
}

/// Finds `text` among `options`, ignoring case, surrounding whitespace and a
/// trailing " column".
pub fn resolve_option(options: &[String], text: &str) -> Option<String> {
    let t = text.trim().trim_end_matches(['?', '.', ',', '!']).to_lowercase();
    let bare = t.strip_suffix(" column").unwrap_or(&t).trim();
    let bare = bare.strip_prefix("the ").unwrap_or(bare);
    options
        .iter()
        .find(|o| o.to_lowercase() == t || o.to_lowercase() == bare)
        .cloned()
}

pub fn parse_int(text: &str) -> Option<Value> {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    text.parse::<i64>().ok().map(Value::Int)
}

pub fn parse_real(text: &str) -> Option<Value> {
    if !crate::text::is_numeral(text) {
        return None;
    }
    text.parse::<f64>().ok().map(Value::Real)
}

/// `[1, 2.5, 3]` or `[1 2.5 3]`.
pub fn parse_array(text: &str) -> Option<Value> {
    let inner = text.trim().strip_prefix('[')?.strip_suffix(']')?;
    let items: Vec<&str> = inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return None;
    }
    let xs: Option<Vec<f64>> = items
        .iter()
        .map(|s| {
            if crate::text::is_numeral(s) {
                s.parse().ok()
            } else {
                None
            }
        })
        .collect();
    Value::array(xs?).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{Collection, Column, ModelKind, ModelRef};
    use proptest::prelude::*;

    fn dogmatism() -> Value {
        Value::Collection(
            Collection::new(vec![
                ("post".into(), Column::Text(vec!["a".into(), "b".into()])),
                ("score".into(), Column::Numeric(vec![3.0, 9.0])),
                ("category".into(), Column::Text(vec!["x".into(), "y".into()])),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn int_literal() {
        let reg = TypeRegistry::builtin();
        let int = reg.get("Int").unwrap();
        assert_eq!(
            int.parse_input("9", &Environment::new()),
            ParseOutcome::Direct(Value::Int(9), ArgOrigin::Literal)
        );
        assert_eq!(
            int.parse_input("-9", &Environment::new()),
            ParseOutcome::Direct(Value::Int(-9), ArgOrigin::Literal)
        );
        assert_eq!(int.parse_input("1,000", &Environment::new()), ParseOutcome::NoParse);
    }

    #[test]
    fn literal_shadows_variable() {
        let reg = TypeRegistry::builtin();
        let mut env = Environment::new();
        env.bind("9", Value::Int(100)).unwrap();
        assert_eq!(
            reg.get("Int").unwrap().parse_input("9", &env),
            ParseOutcome::Direct(Value::Int(9), ArgOrigin::Literal)
        );
    }

    #[test]
    fn collection_named_where_array_expected() {
        let reg = TypeRegistry::builtin();
        let mut env = Environment::new();
        env.bind("dogmatism_data", dogmatism()).unwrap();
        let array = reg.get("Array").unwrap();
        let ParseOutcome::Mismatch(v, origin) = array.parse_input("dogmatism_data", &env) else {
            panic!("expected a mismatch");
        };
        assert_eq!(origin, ArgOrigin::Var("dogmatism_data".into()));
        let plan = reg.plan_conversion("Array", &v).unwrap();
        assert_eq!(
            plan.prompt,
            "I need an Array but you've given me a Collection. Would you like to use a column from the Collection as an array?"
        );
        assert_eq!(plan.options, vec!["score".to_string()]);
        assert_eq!(
            reg.apply_conversion(&plan, "score", &v).unwrap(),
            Value::array(vec![3.0, 9.0]).unwrap()
        );
        assert_eq!(
            reg.apply_conversion(&plan, "Score", &v).unwrap(),
            Value::array(vec![3.0, 9.0]).unwrap()
        );
        assert_eq!(
            reg.apply_conversion(&plan, "petal", &v).unwrap_err(),
            TypeError::BadChoice("petal".into())
        );
    }

    #[test]
    fn pronoun_passthrough() {
        let reg = TypeRegistry::builtin();
        let mut env = Environment::new();
        let arr = Value::array(vec![1.0, 2.0]).unwrap();
        env.push_history(0, arr.clone());
        assert_eq!(
            reg.get("Array").unwrap().parse_input("that", &env),
            ParseOutcome::Direct(arr, ArgOrigin::History(0))
        );
        assert_eq!(
            reg.get("Array").unwrap().parse_input("that", &Environment::new()),
            ParseOutcome::NoParse
        );
    }

    #[test]
    fn article_and_spaces_normalized() {
        let reg = TypeRegistry::builtin();
        let mut env = Environment::new();
        env.bind("dogmatic_posts", dogmatism()).unwrap();
        assert!(matches!(
            reg.get("Collection").unwrap().parse_input("the Dogmatic Posts", &env),
            ParseOutcome::Direct(_, ArgOrigin::Var(ref n)) if n == "dogmatic_posts"
        ));
    }

    #[test]
    fn no_converter_cases() {
        let reg = TypeRegistry::builtin();
        assert!(matches!(
            reg.plan_conversion("Array", &Value::Int(3)),
            Err(TypeError::NoConverter { .. })
        ));
        let text_only =
            Value::Collection(Collection::new(vec![("post".into(), Column::Text(vec!["a".into()]))]).unwrap());
        assert!(matches!(
            reg.plan_conversion("Array", &text_only),
            Err(TypeError::NoConverter { .. })
        ));
    }

    #[test]
    fn registry_contents() {
        let reg = TypeRegistry::builtin();
        for name in CORE_TYPES {
            assert!(reg.get(name).is_ok(), "{name}");
        }
        for t in reg.types.values() {
            assert!(!t.question_for("x").is_empty());
        }
        let samples = [
            Value::Int(1),
            Value::Real(1.5),
            Value::Text("a".into()),
            Value::array(vec![1.0]).unwrap(),
            dogmatism(),
            Value::Model(ModelRef::untrained(ModelKind::LogisticClassifier, 1)),
            Value::Metric(crate::value::Metric::default()),
            Value::Plot(crate::value::PlotSpec::bar(vec![], vec![], "t", "x", "y").unwrap()),
            Value::Unit,
        ];
        for v in samples {
            assert!(reg.get(v.type_name()).is_ok(), "{}", v.type_name());
        }
    }

    #[test]
    fn array_literals() {
        assert_eq!(
            parse_array("[1, 2.5, 3]"),
            Some(Value::array(vec![1.0, 2.5, 3.0]).unwrap())
        );
        assert_eq!(parse_array("[1 2]"), Some(Value::array(vec![1.0, 2.0]).unwrap()));
        assert_eq!(parse_array("[]"), None);
        assert_eq!(parse_array("[1, x]"), None);
        assert_eq!(parse_array("1, 2"), None);
    }

    fn finite() -> impl Strategy<Value = f64> {
        -1e6f64..1e6
    }

    proptest! {
        #[test]
        fn literal_round_trip(i in any::<i64>(), r in finite(), s in "[a-z]{1,8}", xs in proptest::collection::vec(finite(), 1..8)) {
            let reg = TypeRegistry::builtin();
            let env = Environment::new();
            let cases = [
                ("Int", Value::Int(i)),
                ("Real", Value::Real(r)),
                ("String", Value::Text(s)),
                ("Array", Value::array(xs).unwrap()),
            ];
            for (ty, v) in cases {
                let t = reg.get(ty).unwrap();
                let text = render_literal(&v).unwrap();
                match t.parse_input(&text, &env) {
                    ParseOutcome::Direct(parsed, _) => {
                        prop_assert!((t.matches)(&parsed));
                        prop_assert_eq!(parsed, v);
                    }
                    other => prop_assert!(false, "{} did not parse: {:?}", text, other),
                }
            }
        }

        #[test]
        fn converter_output_matches_target(
            cols in proptest::collection::vec((any::<bool>(), "[a-z]{1,6}"), 1..6),
            rows in 0usize..6,
            pick in any::<prop::sample::Index>(),
        ) {
            let mut seen = std::collections::HashSet::new();
            let mut columns = Vec::new();
            for (numeric, name) in cols {
                if !seen.insert(name.clone()) { continue; }
                let col = if numeric {
                    Column::Numeric((0..rows).map(|r| r as f64 * 1.5).collect())
                } else {
                    Column::Text((0..rows).map(|r| format!("t{r}")).collect())
                };
                columns.push((name, col));
            }
            let v = Value::Collection(Collection::new(columns).unwrap());
            let reg = TypeRegistry::builtin();
            match reg.plan_conversion("Array", &v) {
                Ok(plan) => {
                    prop_assert!(!plan.options.is_empty());
                    let choice = pick.get(&plan.options).clone();
                    let out = reg.apply_conversion(&plan, &choice, &v).unwrap();
                    prop_assert!((reg.get("Array").unwrap().matches)(&out));
                }
                Err(TypeError::NoConverter { .. }) => {
                    let Value::Collection(c) = &v else { unreachable!() };
                    prop_assert!(c.numeric_names().is_empty());
                }
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
