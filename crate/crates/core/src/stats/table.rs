//! Collection plumbing: CSV loading, row filters, column selection and bar
//! chart specs.

use std::path::Path;

use super::StatsError;
use crate::value::{Collection, Column, PlotSpec, Value};

/// Reads a headed CSV. A column is numeric when every cell parses as a
/// finite real, text otherwise.
pub fn load_csv(path: &Path) -> Result<Collection, StatsError> {
    let file = std::fs::File::open(path).map_err(|e| StatsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    read_csv(file)
}

pub fn read_csv(input: impl std::io::Read) -> Result<Collection, StatsError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| StatsError::Malformed(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err(StatsError::EmptyHeader);
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| StatsError::Malformed(e.to_string()))?;
        for (col, cell) in cells.iter_mut().zip(record.iter()) {
            col.push(cell.to_string());
        }
    }
    let columns = headers
        .into_iter()
        .zip(cells)
        .map(|(name, col)| {
            let parsed: Option<Vec<f64>> = col
                .iter()
                .map(|c| c.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect();
            let column = match parsed {
                Some(xs) => Column::Numeric(xs),
                None => Column::Text(col),
            };
            (name, column)
        })
        .collect();
    Collection::new(columns).map_err(|e| StatsError::Malformed(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Num(f64),
    Text(String),
}

/// Keeps whole rows whose `col` cell satisfies `cmp v`, in order.
pub fn filter_rows(c: &Collection, col: &str, cmp: Cmp, v: &Operand) -> Result<Collection, StatsError> {
    let column = c
        .column(col)
        .ok_or_else(|| StatsError::UnknownColumn(col.to_string()))?;
    let keep: Vec<usize> = match (column, v) {
        (Column::Numeric(xs), Operand::Num(t)) => (0..xs.len())
            .filter(|&i| match cmp {
                Cmp::Lt => xs[i] < *t,
                Cmp::Gt => xs[i] > *t,
                Cmp::Le => xs[i] <= *t,
                Cmp::Ge => xs[i] >= *t,
                Cmp::Eq => xs[i] == *t,
                Cmp::Ne => xs[i] != *t,
            })
            .collect(),
        (Column::Text(xs), Operand::Text(t)) if matches!(cmp, Cmp::Eq | Cmp::Ne) => {
            (0..xs.len()).filter(|&i| (xs[i] == *t) == (cmp == Cmp::Eq)).collect()
        }
        (Column::Text(_), _) => {
            return Err(StatsError::TypeMismatch(format!(
                "column '{col}' holds text, so it can only be compared for equality with text"
            )))
        }
        (Column::Numeric(_), Operand::Text(t)) => {
            return Err(StatsError::TypeMismatch(format!(
                "column '{col}' is numeric but '{t}' is not a number"
            )))
        }
    };
    Ok(c.select_rows(&keep))
}

/// A numeric column comes back as an array, a text column as a one-column
/// collection.
pub fn select_column(c: &Collection, name: &str) -> Result<Value, StatsError> {
    let canonical = c
        .column_name(name)
        .ok_or_else(|| StatsError::UnknownColumn(name.to_string()))?;
    match c.column(canonical) {
        Some(Column::Numeric(xs)) => Value::array(xs.clone()).map_err(|_| StatsError::NonFinite),
        Some(col @ Column::Text(_)) => Collection::new(vec![(canonical.to_string(), col.clone())])
            .map(Value::Collection)
            .map_err(|e| StatsError::Malformed(e.to_string())),
        None => Err(StatsError::UnknownColumn(name.to_string())),
    }
}

pub fn select_columns(c: &Collection, names: &[String]) -> Result<Collection, StatsError> {
    let mut cols = Vec::new();
    for n in names {
        let canonical = c.column_name(n).ok_or_else(|| StatsError::UnknownColumn(n.clone()))?;
        cols.push((canonical.to_string(), c.column(canonical).unwrap().clone()));
    }
    Collection::new(cols).map_err(|e| StatsError::Malformed(e.to_string()))
}

/// Splits "a, b and c" (or "a b c") into column names.
pub fn split_names(text: &str) -> Vec<String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.eq_ignore_ascii_case("and"))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Bar chart spec with bars in descending value order.
pub fn plot_bar(categories: &[String], values: &[f64], title: &str) -> Result<PlotSpec, StatsError> {
    if categories.len() != values.len() {
        return Err(StatsError::LengthMismatch {
            left: categories.len(),
            right: values.len(),
        });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    PlotSpec::bar(
        order.iter().map(|&i| categories[i].clone()).collect(),
        order.iter().map(|&i| values[i]).collect(),
        title,
        "category",
        "value",
    )
    .map_err(|e| StatsError::Malformed(e.to_string()))
}
