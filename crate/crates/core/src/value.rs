//! Runtime values that flow between commands.
//!
//! Every value carries exactly one conversational type name (see
//! [`Value::type_name`]); the type registry uses that name to decide whether a
//! value can fill an argument directly or needs a conversion dialogue.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("array element {index} is not finite")]
    NonFinite { index: usize },
    #[error("column '{name}' has {found} rows, expected {expected}")]
    RaggedColumn {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("column names must be non-empty")]
    EmptyColumnName,
    #[error("plot has {categories} categories but {values} values")]
    PlotShape { categories: usize, values: usize },
}

/// A sequence of finite reals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Array(Vec<f64>);

impl Array {
    pub fn new(values: Vec<f64>) -> Result<Self, ValueError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ValueError::NonFinite { index });
        }
        Ok(Array(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Array {
    type Error = ValueError;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Array::new(values)
    }
}

impl From<Array> for Vec<f64> {
    fn from(a: Array) -> Self {
        a.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Column {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Column::Numeric(_))
    }

    /// Keeps the rows whose index is listed in `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Text(v) => Column::Text(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Numeric(v) => fmt_real(v[row]),
            Column::Text(v) => v[row].clone(),
        }
    }
}

/// Named, equal-length columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawCollection", into = "RawCollection")]
pub struct Collection {
    columns: IndexMap<String, Column>,
}

#[derive(Serialize, Deserialize)]
struct RawCollection {
    columns: Vec<(String, Column)>,
}

impl TryFrom<RawCollection> for Collection {
    type Error = ValueError;
    fn try_from(raw: RawCollection) -> Result<Self, Self::Error> {
        Collection::new(raw.columns)
    }
}

impl From<Collection> for RawCollection {
    fn from(c: Collection) -> Self {
        RawCollection {
            columns: c.columns.into_iter().collect(),
        }
    }
}

impl Collection {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self, ValueError> {
        let mut map = IndexMap::with_capacity(columns.len());
        let mut expected = None;
        for (name, column) in columns {
            if name.trim().is_empty() {
                return Err(ValueError::EmptyColumnName);
            }
            let len = column.len();
            match expected {
                None => expected = Some(len),
                Some(e) if e != len => {
                    return Err(ValueError::RaggedColumn {
                        name,
                        expected: e,
                        found: len,
                    })
                }
                _ => {}
            }
            if map.contains_key(&name) {
                return Err(ValueError::DuplicateColumn(name));
            }
            map.insert(name, column);
        }
        Ok(Collection { columns: map })
    }

    /// Exact lookup, falling back to a case-insensitive match.
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name).or_else(|| {
            self.columns
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, c)| c)
        })
    }

    /// Canonical spelling of a column name, if present.
    pub fn column_name(&self, name: &str) -> Option<&str> {
        if let Some((k, _)) = self.columns.get_key_value(name) {
            return Some(k);
        }
        self.columns
            .keys()
            .find(|k| k.eq_ignore_ascii_case(name))
            .map(String::as_str)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.keys().cloned().collect()
    }

    pub fn numeric_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|(_, c)| c.is_numeric())
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn first_text_column(&self) -> Option<(&str, &[String])> {
        self.columns.iter().find_map(|(k, c)| match c {
            Column::Text(v) => Some((k.as_str(), v.as_slice())),
            Column::Numeric(_) => None,
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.columns.values().next().map_or(0, Column::len)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Collection {
        Collection {
            columns: self.columns.iter().map(|(k, c)| (k.clone(), c.select(rows))).collect(),
        }
    }

    /// `<Collection: [post, score, category]>`
    pub fn summary(&self) -> String {
        format!("<Collection: [{}]>", self.names().join(", "))
    }

    /// Summary plus shape and up to `max_rows` leading rows.
    pub fn preview(&self, max_rows: usize) -> String {
        let mut out = format!("{} {}x{}", self.summary(), self.rows(), self.width());
        for row in 0..self.rows().min(max_rows) {
            let cells: Vec<String> = self.columns.values().map(|c| c.cell(row)).collect();
            let _ = write!(out, "\n  {}", cells.join(" | "));
        }
        if self.rows() > max_rows {
            out.push_str("\n  ...");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticClassifier,
    LinearRegressor,
}

impl ModelKind {
    pub fn describe(self) -> &'static str {
        match self {
            ModelKind::LogisticClassifier => "logistic regression classifier",
            ModelKind::LinearRegressor => "linear regression model",
        }
    }
}

/// A fitted (or unfitted) model. Coefficients live in standardized feature
/// space; `means` and `scales` map raw features into that space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    /// Class labels for classifiers, empty for regressors.
    pub classes: Vec<String>,
    /// One row per class (classifier) or a single row (regressor).
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub trained: bool,
    pub seed: u64,
}

impl ModelRef {
    pub fn untrained(kind: ModelKind, seed: u64) -> Self {
        ModelRef {
            kind,
            feature_names: Vec::new(),
            classes: Vec::new(),
            weights: Vec::new(),
            bias: Vec::new(),
            means: Vec::new(),
            scales: Vec::new(),
            trained: false,
            seed,
        }
    }

    pub fn summary(&self) -> String {
        if self.trained {
            format!(
                "<Model: {} on [{}]>",
                self.kind.describe(),
                self.feature_names.join(", ")
            )
        } else {
            format!("<Model: {} (untrained)>", self.kind.describe())
        }
    }
}

/// Label → real map, e.g. a test statistic and its p-value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metric(pub IndexMap<String, f64>);

impl Metric {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Metric(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.0.get(label).copied()
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}: {}", fmt_real(*v))).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Bar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub categories: Vec<String>,
    pub values: Vec<f64>,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl PlotSpec {
    pub fn bar(
        categories: Vec<String>,
        values: Vec<f64>,
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Result<Self, ValueError> {
        if categories.len() != values.len() {
            return Err(ValueError::PlotShape {
                categories: categories.len(),
                values: values.len(),
            });
        }
        Ok(PlotSpec {
            kind: PlotKind::Bar,
            categories,
            values,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
        })
    }
}

/// Tagged runtime value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Array(Array),
    Collection(Collection),
    Model(ModelRef),
    Metric(Metric),
    Plot(PlotSpec),
    Unit,
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "Int",
            Value::Real(_) => "Real",
            Value::Text(_) => "String",
            Value::Array(_) => "Array",
            Value::Collection(_) => "Collection",
            Value::Model(_) => "Model",
            Value::Metric(_) => "Metric",
            Value::Plot(_) => "Plot",
            Value::Unit => "Unit",
        }
    }

    pub fn array(values: Vec<f64>) -> Result<Value, ValueError> {
        Array::new(values).map(Value::Array)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// One-line rendering used in chat replies.
    pub fn summary(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(r) => fmt_real(*r),
            Value::Text(s) => s.clone(),
            Value::Array(a) => fmt_array(a.as_slice(), 6),
            Value::Collection(c) => c.summary(),
            Value::Model(m) => m.summary(),
            Value::Metric(m) => m.summary(),
            Value::Plot(p) => format!("<Plot: {} ({} bars)>", p.title, p.values.len()),
            Value::Unit => "()".to_string(),
        }
    }

    /// Sidebar preview: arrays and collections truncated to five
    /// elements/rows plus their shape.
    pub fn preview(&self) -> String {
        match self {
            Value::Array(a) => format!("{} (n={})", fmt_array(a.as_slice(), 5), a.len()),
            Value::Collection(c) => c.preview(5),
            other => other.summary(),
        }
    }
}

/// Shortest round-trip decimal form, always with a fractional part or exponent.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

/// `[1.0, 2.0, 3.0, ..., 8.0, 9.0, 10.0]` when longer than `max`.
pub fn fmt_array(values: &[f64], max: usize) -> String {
    let render = |vs: &[f64]| vs.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>();
    if values.len() <= max {
        return format!("[{}]", render(values).join(", "));
    }
    let head = max.div_ceil(2);
    let tail = max / 2;
    format!(
        "[{}, ..., {}]",
        render(&values[..head]).join(", "),
        render(&values[values.len() - tail..]).join(", ")
    )
}

/// `['post' 'score' 'category']`, the way numpy prints a string array.
pub fn fmt_name_row(names: &[String]) -> String {
    let quoted: Vec<String> = names.iter().map(|n| format!("'{n}'")).collect();
    format!("[{}]", quoted.join(" "))
}

/// `['post', 'score']` style listing of strings, truncated like [`fmt_array`].
pub fn fmt_text_list(values: &[String], max: usize) -> String {
    let quote = |s: &String| format!("'{}'", s.replace('\'', "\\'"));
    if values.len() <= max {
        return format!("[{}]", values.iter().map(quote).collect::<Vec<_>>().join(",\n "));
    }
    let head = max.div_ceil(2);
    let tail = max / 2;
    let mut items: Vec<String> = values[..head].iter().map(quote).collect();
    items.push("'...'".to_string());
    items.extend(values[values.len() - tail..].iter().map(quote));
    format!("[{}]", items.join(",\n "))
}
