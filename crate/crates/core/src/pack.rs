//! The shipped data science command pack: loading and filtering tables,
//! descriptive and inferential statistics, lexicon counts, models and plots.

use crate::command::{CommandError, CommandKind, CommandRegistry, CommandSpec, ExecCtx, MetaKind};
use crate::stats::{self, descriptive, inference, lexicon, model, random, table, StatsError};
use crate::value::{
    fmt_array, fmt_name_row, fmt_real, fmt_text_list, Collection, Column, Metric, ModelKind, ModelRef, Value,
};

/// Options offered by the collection comparison command.
pub const TEST_OPTIONS: [&str; 2] = ["Mann-Whitney U", "Welch t-test"];

/// Floors the pack must meet.
pub const MIN_COMMANDS: usize = 25;
pub const MIN_EXAMPLES: usize = 5;

fn arr<'a>(v: &'a Value, what: &str) -> Result<&'a [f64], CommandError> {
    match v {
        Value::Array(a) => Ok(a.as_slice()),
        other => Err(CommandError::Invalid(format!(
            "{what} must be an Array, not {}",
            other.type_name()
        ))),
    }
}

fn coll<'a>(v: &'a Value, what: &str) -> Result<&'a Collection, CommandError> {
    match v {
        Value::Collection(c) => Ok(c),
        other => Err(CommandError::Invalid(format!(
            "{what} must be a Collection, not {}",
            other.type_name()
        ))),
    }
}

fn num(v: &Value, what: &str) -> Result<f64, CommandError> {
    v.as_f64()
        .ok_or_else(|| CommandError::Invalid(format!("{what} must be a number, not {}", v.type_name())))
}

fn int(v: &Value, what: &str) -> Result<i64, CommandError> {
    match v {
        Value::Int(i) => Ok(*i),
        other => Err(CommandError::Invalid(format!(
            "{what} must be an Int, not {}",
            other.type_name()
        ))),
    }
}

fn text<'a>(v: &'a Value, what: &str) -> Result<&'a str, CommandError> {
    match v {
        Value::Text(s) => Ok(s),
        other => Err(CommandError::Invalid(format!(
            "{what} must be a String, not {}",
            other.type_name()
        ))),
    }
}

fn model_ref(v: &Value) -> Result<&ModelRef, CommandError> {
    match v {
        Value::Model(m) => Ok(m),
        other => Err(CommandError::Invalid(format!(
            "expected a Model, not {}",
            other.type_name()
        ))),
    }
}

fn numeric_col<'a>(c: &'a Collection, name: &str) -> Result<&'a [f64], CommandError> {
    match c.column(name) {
        Some(Column::Numeric(xs)) => Ok(xs),
        Some(Column::Text(_)) => Err(StatsError::TypeMismatch(format!("column '{name}' is not numeric")).into()),
        None => Err(StatsError::UnknownColumn(name.to_string()).into()),
    }
}

/// Class labels: the first text column, or a lone numeric column.
fn labels_of(c: &Collection) -> Result<Vec<String>, CommandError> {
    if let Some((_, xs)) = c.first_text_column() {
        return Ok(xs.to_vec());
    }
    match c.columns().next() {
        Some((_, Column::Numeric(xs))) if c.width() == 1 => Ok(xs.iter().map(|x| fmt_real(*x)).collect()),
        _ => Err(CommandError::Invalid("the labels need a text column".into())),
    }
}

fn with_column(c: &Collection, name: &str, column: Column) -> Result<Collection, CommandError> {
    let mut cols: Vec<(String, Column)> = c
        .columns()
        .filter(|(n, _)| !n.eq_ignore_ascii_case(name))
        .map(|(n, col)| (n.to_string(), col.clone()))
        .collect();
    cols.push((name.to_string(), column));
    Ok(Collection::new(cols)?)
}

fn round4(x: f64) -> String {
    fmt_real((x * 1e4).round() / 1e4)
}

/// Full listing of a value, used where the reply shows the data itself.
fn listing(v: &Value) -> String {
    match v {
        Value::Array(a) => fmt_array(a.as_slice(), 10),
        Value::Collection(c) if c.width() == 1 => match c.columns().next() {
            Some((_, Column::Text(xs))) => fmt_text_list(xs, 10),
            _ => c.preview(5),
        },
        other => other.summary(),
    }
}

fn filter_cmd(id: &str, title: &str, word: &str, cmp: table::Cmp, examples: &[&str]) -> CommandSpec {
    CommandSpec::builder(id, title)
        .intro(&format!("filter rows with a column {word} a value"))
        .examples(examples)
        .help(&[
            &format!("Keeps the rows of the collection where the column is {word} the value."),
            "Rows keep their original order.",
        ])
        .ask("c", "Collection", "Which collection do you want to filter?")
        .ask("col", "String", "Which column should I compare?")
        .ask(
            "v",
            if cmp == table::Cmp::Eq { "String" } else { "Real" },
            &format!("What value should the column be {word}?"),
        )
        .returns(&["Collection"])
        .body(move |a, _| {
            let c = coll(&a[0], "the collection")?;
            let col = text(&a[1], "the column")?;
            let operand = match (&a[2], c.column(col)) {
                (Value::Text(s), Some(Column::Numeric(_))) => match s.trim().parse::<f64>() {
                    Ok(x) => table::Operand::Num(x),
                    Err(_) => table::Operand::Text(s.clone()),
                },
                (Value::Text(s), _) => table::Operand::Text(s.clone()),
                (v, _) => table::Operand::Num(num(v, "the value")?),
            };
            Ok(Value::Collection(table::filter_rows(c, col, cmp, &operand)?))
        })
        .explain(|v, _| format!("Here is the new collection:\n{}", v.summary()))
        .snippet(&format!(
            "def {id}(c, col, v):\n    return c[c[col] {} v]",
            match cmp {
                table::Cmp::Lt => "<",
                table::Cmp::Gt => ">",
                table::Cmp::Le => "<=",
                table::Cmp::Ge => ">=",
                table::Cmp::Eq => "==",
                table::Cmp::Ne => "!=",
            }
        ))
        .build()
        .expect("filter command is well formed")
}

fn arith(id: &str, title: &str, op: fn(f64, f64) -> f64, sym: &str, examples: &[&str]) -> CommandSpec {
    let verb = title.split_whitespace().next().unwrap_or(id);
    CommandSpec::builder(id, title)
        .intro(&format!("{verb} two numbers"))
        .examples(examples)
        .help(&[&format!("Computes x {sym} y.")])
        .ask("x", "Real", "What is the first number?")
        .ask("y", "Real", "What is the second number?")
        .returns(&["Real"])
        .body(move |a, _| Ok(Value::Real(op(num(&a[0], "x")?, num(&a[1], "y")?))))
        .explain(|v, _| format!("The result is {}", v.summary()))
        .snippet(&format!("def {id}(x, y):\n    return x {sym} y"))
        .build()
        .expect("arithmetic command is well formed")
}

fn data_commands() -> Vec<CommandSpec> {
    vec![
        CommandSpec::builder("load_csv", "load csv file {path}")
            .intro("load a csv file")
            .examples(&[
                "load {path}",
                "load data from {path}",
                "read the csv file {path}",
                "open the file {path}",
                "import data from {path}",
            ])
            .help(&[
                "Reads a csv file with a header row into a collection.",
                "A column is numeric when every cell is a number.",
            ])
            .ask("path", "String", "Where is the csv file?")
            .returns(&["Collection"])
            .body(|a, ctx| {
                let path = ctx.resolve(text(&a[0], "the path")?);
                Ok(Value::Collection(table::load_csv(&path)?))
            })
            .explain(|v, _| match v {
                Value::Collection(c) => format!("Loaded {} rows:\n{}", c.rows(), c.summary()),
                other => other.summary(),
            })
            .snippet("def load_csv(path):\n    import pandas as pd\n    return pd.read_csv(path)")
            .build()
            .expect("load_csv"),
        CommandSpec::builder("list_columns", "list the columns in {collection}")
            .intro("list the columns")
            .examples(&[
                "what columns are in {collection}",
                "show the columns of {collection}",
                "column names of {collection}",
                "list columns of {collection}",
                "which columns does {collection} have",
            ])
            .help(&["Lists the column names of a collection."])
            .ask("collection", "Collection", "Which collection do you want to look at?")
            .returns(&["String"])
            .body(|a, _| Ok(Value::Text(fmt_name_row(&coll(&a[0], "the collection")?.names()))))
            .explain(|v, _| format!("Here are the columns in that collection:\n{}", v.summary()))
            .snippet("def list_columns(collection):\n    return str(collection.columns.values)")
            .build()
            .expect("list_columns"),
        CommandSpec::builder("select_column", "get the {column} column from {collection}")
            .intro("select a column")
            .examples(&[
                "the {column} column in {collection}",
                "the {column} column from {collection}",
                "show me the {column} column in {collection}",
                "can you show me the {column} column in {collection}",
                "select column {column} from {collection}",
                "{column} column of {collection}",
            ])
            .help(&[
                "Picks one column out of a collection.",
                "Numeric columns come back as arrays.",
            ])
            .ask("column", "String", "Which column do you want?")
            .ask("collection", "Collection", "Which collection is the column in?")
            .returns(&["Array", "Collection"])
            .body(|a, _| {
                let name = text(&a[0], "the column")?;
                let c = coll(&a[1], "the collection")?;
                Ok(table::select_column(c, name)?)
            })
            .explain(|v, args| {
                let name = match args.first() {
                    Some(Value::Text(s)) => s.clone(),
                    _ => String::new(),
                };
                format!("Sure, here is the '{name}' column:\n{}", listing(v))
            })
            .snippet("def select_column(column, collection):\n    return collection[column].values")
            .build()
            .expect("select_column"),
        CommandSpec::builder("select_columns", "select columns {columns} from {collection}")
            .intro("select columns")
            .examples(&[
                "select features {columns} from {collection}",
                "use columns {columns} from {collection}",
                "select the columns {columns} in {collection}",
                "get columns {columns} from {collection}",
                "pick features {columns} from {collection}",
                "select columns",
            ])
            .help(&[
                "Keeps only the named columns of a collection.",
                "Separate names with commas or spaces.",
            ])
            .ask("columns", "String", "Which columns do you want?")
            .ask("collection", "Collection", "Which collection are the columns in?")
            .returns(&["Collection"])
            .body(|a, _| {
                let names = table::split_names(text(&a[0], "the columns")?);
                let c = coll(&a[1], "the collection")?;
                Ok(Value::Collection(table::select_columns(c, &names)?))
            })
            .explain(|v, _| format!("Here is the new collection:\n{}", v.summary()))
            .snippet("def select_columns(columns, collection):\n    return collection[[c for c in columns.replace(\",\", \" \").split() if c != \"and\"]]")
            .build()
            .expect("select_columns"),
        CommandSpec::builder("count_rows", "count the rows in {collection}")
            .intro("count rows")
            .examples(&[
                "how many rows are in {collection}",
                "number of rows in {collection}",
                "row count of {collection}",
                "how big is {collection}",
                "count rows of {collection}",
            ])
            .help(&["Counts the rows of a collection."])
            .ask("collection", "Collection", "Which collection should I count?")
            .returns(&["Int"])
            .body(|a, _| Ok(Value::Int(coll(&a[0], "the collection")?.rows() as i64)))
            .explain(|v, _| format!("There are {} rows", v.summary()))
            .snippet("def count_rows(collection):\n    return collection.shape[0]")
            .build()
            .expect("count_rows"),
        filter_cmd(
            "filter_less",
            "filter collection {c} with {col} column less than {v}",
            "less than",
            table::Cmp::Lt,
            &[
                "filter {c} with {col} < {v}",
                "rows of {c} where {col} is less than {v}",
                "filter {c} where {col} is below {v}",
                "keep rows in {c} with {col} under {v}",
                "filter {c} by {col} less than {v}",
                "give me rows in {c} with {col} less than {v}",
            ],
        ),
        filter_cmd(
            "filter_greater",
            "filter collection {c} with {col} column greater than {v}",
            "greater than",
            table::Cmp::Gt,
            &[
                "filter {c} with {col} > {v}",
                "rows of {c} where {col} is greater than {v}",
                "filter {c} where {col} is above {v}",
                "keep rows in {c} with {col} over {v}",
                "filter {c} by {col} greater than {v}",
                "give me rows in {c} with {col} greater than {v}",
            ],
        ),
        filter_cmd(
            "filter_equal",
            "filter collection {c} with {col} column equal to {v}",
            "equal to",
            table::Cmp::Eq,
            &[
                "filter {c} with {col} = {v}",
                "rows of {c} where {col} equals {v}",
                "filter {c} where {col} is exactly {v}",
                "keep rows in {c} with {col} equal to {v}",
                "filter {c} by {col} equal to {v}",
            ],
        ),
        CommandSpec::builder("save", "save {value} as {name}")
            .intro("save a value")
            .examples(&[
                "save {value} to {name}",
                "store {value} as {name}",
                "save {value} in {name}",
                "remember {value} as {name}",
                "name {value} as {name}",
            ])
            .help(&[
                "Stores a value under a name you can use later.",
                "Spaces in the name become underscores.",
            ])
            .ask("value", "Any", "What do you want to save?")
            .ask("name", "String", "What name should I save it as?")
            .returns(&["Any"])
            .kind(CommandKind::Save {
                value_slot: 0,
                name_slot: 1,
            })
            .body(|a, _| Ok(a[0].clone()))
            .explain(|v, args| {
                let name = match args.get(1) {
                    Some(Value::Text(s)) => crate::env::normalize_name(s),
                    _ => String::new(),
                };
                format!("Saving as '{name}'\n{}", v.summary())
            })
            .snippet("def save(value, name):\n    return value")
            .build()
            .expect("save"),
    ]
}

fn descriptive_commands() -> Vec<CommandSpec> {
    vec![
        CommandSpec::builder("quartiles", "compute quartiles for an {array}")
            .intro("compute quartiles")
            .examples(&[
                "find quartiles",
                "quartiles of {array}",
                "compute the quartiles of {array}",
                "what are the quartiles of {array}",
                "find quartiles for {array}",
                "quartiles",
            ])
            .help(&[
                "Splits the sorted values into four ranges of equal count.",
                "Boundaries use linear interpolation between order statistics.",
            ])
            .ask("array", "Array", "What is the array you want to analyze?")
            .returns(&["Array"])
            .body(|a, _| {
                let q = descriptive::quartiles(arr(&a[0], "the array")?)?;
                Ok(Value::array(q.to_vec())?)
            })
            .explain(|v, _| match v {
                Value::Array(q) if q.len() == 5 => {
                    let b: Vec<String> = q.as_slice().iter().map(|x| fmt_real(*x)).collect();
                    format!(
                        "Q1 is from {} to {}, Q2 is from {} to {}, Q3 is from {} to {}, and Q4 is from {} to {}",
                        b[0], b[1], b[1], b[2], b[2], b[3], b[3], b[4]
                    )
                }
                other => other.summary(),
            })
            .snippet("def quartiles(array):\n    import numpy as np\n    return np.percentile(array, [0, 25, 50, 75, 100])")
            .build()
            .expect("quartiles"),
        CommandSpec::builder("mean", "compute the mean of {array}")
            .intro("compute the mean")
            .examples(&[
                "mean of {array}",
                "take the mean of {array}",
                "average of {array}",
                "what is the mean of {array}",
                "find the average of {array}",
            ])
            .help(&["Averages the values of an array."])
            .ask("array", "Array", "What array should I average?")
            .returns(&["Real"])
            .body(|a, _| Ok(Value::Real(descriptive::mean(arr(&a[0], "the array")?)?)))
            .explain(|v, _| format!("The mean is {}", v.summary()))
            .snippet("def mean(array):\n    import numpy as np\n    return np.mean(array)")
            .build()
            .expect("mean"),
        CommandSpec::builder("variance", "compute the variance of {array}")
            .intro("compute the variance")
            .examples(&[
                "variance of {array}",
                "tell me the variance of {array}",
                "what is the variance of {array}",
                "find the variance of {array}",
                "how spread out is {array}",
            ])
            .help(&["Sample variance of an array, dividing by n - 1."])
            .ask("array", "Array", "What array should I use?")
            .returns(&["Real"])
            .body(|a, _| Ok(Value::Real(descriptive::variance(arr(&a[0], "the array")?)?)))
            .explain(|v, _| format!("The variance is {}", v.summary()))
            .snippet("def variance(array):\n    import numpy as np\n    return np.var(array, ddof=1)")
            .build()
            .expect("variance"),
        CommandSpec::builder("log_transform", "log-transform {array}")
            .intro("log-transform an array")
            .examples(&[
                "log transform {array}",
                "take the log of {array}",
                "log of {array}",
                "apply a log transform to {array}",
                "natural log of {array}",
            ])
            .help(&["Takes the natural log of every value.", "All values must be positive."])
            .ask("array", "Array", "What array should I transform?")
            .returns(&["Array"])
            .body(|a, _| Ok(Value::array(descriptive::log_transform(arr(&a[0], "the array")?)?)?))
            .explain(|v, _| format!("Here is the transformed array:\n{}", v.summary()))
            .snippet("def log_transform(array):\n    import numpy as np\n    return np.log(array)")
            .build()
            .expect("log_transform"),
        CommandSpec::builder("length", "get the length of {arr}")
            .intro("get the length of an array")
            .examples(&[
                "length of {arr}",
                "the length of {arr}",
                "how long is {arr}",
                "how many elements are in {arr}",
                "size of array {arr}",
                "number of values in {arr}",
            ])
            .help(&["Counts the elements of an array."])
            .ask("arr", "Array", "What array should I measure?")
            .returns(&["Int"])
            .body(|a, _| Ok(Value::Int(arr(&a[0], "the array")?.len() as i64)))
            .explain(|v, _| format!("The array has {} elements", v.summary()))
            .snippet("def length(arr):\n    return arr.shape[0]")
            .build()
            .expect("length"),
        CommandSpec::builder("random_array", "generate a random array of size {n}")
            .intro("generate a random array")
            .examples(&[
                "generate a new array from the normal distribution",
                "random array",
                "random normal array with {n} values",
                "make a random array of length {n}",
                "sample {n} values from a normal distribution",
                "generate random numbers",
            ])
            .help(&[
                "Draws values from a standard normal distribution.",
                "The seed is recorded so the script reproduces the same values.",
            ])
            .ask("n", "Int", "How many values should the array have?")
            .returns(&["Array"])
            .kind(CommandKind::Random)
            .body(|a, ctx| Ok(Value::array(random::random_normal(int(&a[0], "n")?, ctx.seed)?)?))
            .explain(|v, _| format!("Here is a random array:\n{}", v.summary()))
            .snippet("def random_array(n, seed=None):\n    import numpy as np\n    return np.random.default_rng(seed).standard_normal(n)")
            .build()
            .expect("random_array"),
    ]
}

fn test_commands() -> Vec<CommandSpec> {
    vec![
        CommandSpec::builder("pearson_correlation", "compute pearson correlation: {x} and {y}")
            .intro("compute a pearson correlation")
            .examples(&[
                "pearson correlation between {x} and {y}",
                "pearson correlation {x} {y}",
                "how are {x} and {y} correlated",
                "correlation between {x} and {y}",
                "correlate {x} with {y}",
            ])
            .help(&[
                "Measures the linear relationship between two arrays of equal length.",
                "The p-value is two-sided.",
            ])
            .ask("x", "Array", "Where is the first array to analyze?")
            .ask("y", "Array", "Where is the second array?")
            .returns(&["Metric"])
            .body(|a, _| {
                let r = inference::pearson(arr(&a[0], "x")?, arr(&a[1], "y")?)?;
                Ok(Value::Metric(Metric::from_pairs([
                    ("correlation", r.statistic),
                    ("p_value", r.p_value),
                ])))
            })
            .explain(|v, _| match v {
                Value::Metric(m) => format!(
                    "Correlation of {} with p-value of {}",
                    round4(m.get("correlation").unwrap_or(f64::NAN)),
                    round4(m.get("p_value").unwrap_or(f64::NAN))
                ),
                other => other.summary(),
            })
            .snippet("def pearson_correlation(x, y):\n    from scipy.stats import pearsonr\n    return pearsonr(x, y)")
            .build()
            .expect("pearson_correlation"),
        CommandSpec::builder("mann_whitney", "run a mann-whitney u test on {x} and {y}")
            .intro("run a Mann-Whitney U test")
            .examples(&[
                "mann-whitney u test between {x} and {y}",
                "mann whitney u test on {x} and {y}",
                "compare {x} and {y} with a u test",
                "rank sum test between {x} and {y}",
                "is {x} different from {y} by rank",
            ])
            .help(&[
                "Compares two samples by ranks.",
                "Small samples without ties get an exact p-value.",
            ])
            .ask("x", "Array", "Where is the first sample?")
            .ask("y", "Array", "Where is the second sample?")
            .returns(&["Metric"])
            .body(|a, _| {
                let r = inference::mann_whitney(arr(&a[0], "x")?, arr(&a[1], "y")?)?;
                Ok(Value::Metric(Metric::from_pairs([("U", r.statistic), ("p_value", r.p_value)])))
            })
            .explain(|v, _| match v {
                Value::Metric(m) => format!(
                    "U of {} with p-value of {}",
                    round4(m.get("U").unwrap_or(f64::NAN)),
                    round4(m.get("p_value").unwrap_or(f64::NAN))
                ),
                other => other.summary(),
            })
            .snippet("def mann_whitney(x, y):\n    from scipy.stats import mannwhitneyu\n    return mannwhitneyu(x, y)")
            .build()
            .expect("mann_whitney"),
        CommandSpec::builder("welch_t_test", "run a welch t-test on {x} and {y}")
            .intro("run a Welch t-test")
            .examples(&[
                "t-test between {x} and {y}",
                "t test {x} versus {y}",
                "welch t test between {x} and {y}",
                "do a t-test on {x} and {y}",
                "are the means of {x} and {y} different",
            ])
            .help(&[
                "Compares the means of two samples without assuming equal variances.",
                "Skewed data may need a log transform first.",
            ])
            .ask("x", "Array", "Where is the first sample?")
            .ask("y", "Array", "Where is the second sample?")
            .returns(&["Metric"])
            .body(|a, _| {
                let r = inference::welch_t_test(arr(&a[0], "x")?, arr(&a[1], "y")?)?;
                Ok(Value::Metric(Metric::from_pairs([("t", r.t), ("df", r.df), ("p_value", r.p_value)])))
            })
            .explain(|v, _| match v {
                Value::Metric(m) => format!(
                    "t of {} with p-value of {}",
                    round4(m.get("t").unwrap_or(f64::NAN)),
                    round4(m.get("p_value").unwrap_or(f64::NAN))
                ),
                other => other.summary(),
            })
            .snippet("def welch_t_test(x, y):\n    from scipy.stats import ttest_ind\n    return ttest_ind(x, y, equal_var=False)")
            .build()
            .expect("welch_t_test"),
        CommandSpec::builder("compare_collections", "compute {test} between {a} and {b}")
            .intro("run statistical tests between two data collections.")
            .examples(&[
                "run {test} tests between the columns in {a} and {b}",
                "compare the columns of {a} and {b} with {test}",
                "run statistical tests between {a} and {b}",
                "test for differences between {a} and {b}",
                "compare collections {a} and {b}",
            ])
            .help(&[
                "Runs the chosen test on every numeric column the two collections share.",
                "count_a and count_b are column sums, total_a and total_b sum every numeric column.",
                "The p-values are not corrected for multiple comparisons.",
            ])
            .choice("test", &TEST_OPTIONS, "What test would you like to run?")
            .ask("a", "Collection", "Where is the first collection?")
            .ask("b", "Collection", "Where is the second collection?")
            .returns(&["Collection"])
            .body(|a, _| {
                let test = text(&a[0], "the test")?.to_string();
                let (ca, cb) = (coll(&a[1], "the first collection")?, coll(&a[2], "the second collection")?);
                compare(&test, ca, cb)
            })
            .explain(|v, _| format!("Here are the test results:\n{}", v.summary()))
            .snippet(
                "def compare_collections(test, a, b):\n    import pandas as pd\n    from scipy.stats import mannwhitneyu, ttest_ind\n    rows = []\n    for col in a.columns:\n        if col in b.columns:\n            if test == \"Mann-Whitney U\":\n                s, p = mannwhitneyu(a[col], b[col])\n            else:\n                s, p = ttest_ind(a[col], b[col], equal_var=False)\n            rows.append((col, s, p, a[col].sum(), b[col].sum(), a.values.sum(), b.values.sum()))\n    return pd.DataFrame(rows, columns=[\"category\", \"statistic\", \"p_value\", \"count_a\", \"count_b\", \"total_a\", \"total_b\"])",
            )
            .build()
            .expect("compare_collections"),
        CommandSpec::builder("holm_correction", "apply holm correction to {stats}")
            .intro("apply a Holm correction")
            .examples(&[
                "apply holmes correction to {stats}",
                "holm correction on {stats}",
                "correct {stats} for multiple comparisons",
                "adjust the p-values in {stats}",
                "apply holm-bonferroni to {stats}",
            ])
            .help(&[
                "Adjusts the p_value column with the Holm step-down method.",
                "The adjusted values go in a new p_adjusted column.",
            ])
            .ask("stats", "Collection", "Which statistics should I correct?")
            .returns(&["Collection"])
            .body(|a, _| {
                let c = coll(&a[0], "the statistics")?;
                let adjusted = inference::holm_correct(numeric_col(c, "p_value")?)?;
                Ok(Value::Collection(with_column(c, "p_adjusted", Column::Numeric(adjusted))?))
            })
            .explain(|v, _| format!("Here are the corrected statistics:\n{}", v.summary()))
            .snippet("def holm_correction(stats):\n    from statsmodels.stats.multitest import multipletests\n    stats = stats.copy()\n    stats[\"p_adjusted\"] = multipletests(stats[\"p_value\"], method=\"holm\")[1]\n    return stats")
            .build()
            .expect("holm_correction"),
        CommandSpec::builder("select_significant", "select significant statistics from {stats}")
            .intro("select significant statistics")
            .examples(&[
                "significant results in {stats}",
                "keep the significant rows of {stats}",
                "filter {stats} to significant results",
                "which results in {stats} are significant",
                "select significant from {stats}",
            ])
            .help(&[
                "Keeps rows whose adjusted p-value is below the significance threshold.",
                "Falls back to the p_value column when nothing has been corrected.",
            ])
            .ask("stats", "Collection", "Which statistics should I filter?")
            .returns(&["Collection"])
            .body(|a, ctx| {
                let c = coll(&a[0], "the statistics")?;
                let col = if c.column("p_adjusted").is_some() { "p_adjusted" } else { "p_value" };
                numeric_col(c, col)?;
                Ok(Value::Collection(table::filter_rows(
                    c,
                    col,
                    table::Cmp::Lt,
                    &table::Operand::Num(ctx.alpha),
                )?))
            })
            .explain(|v, _| format!("Here are the significant statistics:\n{}", v.summary()))
            .snippet("def select_significant(stats, alpha=0.05):\n    col = \"p_adjusted\" if \"p_adjusted\" in stats else \"p_value\"\n    return stats[stats[col] < alpha]")
            .build()
            .expect("select_significant"),
    ]
}

/// One row per shared numeric column.
fn compare(test: &str, a: &Collection, b: &Collection) -> Result<Value, CommandError> {
    let total = |c: &Collection| -> f64 {
        c.columns()
            .filter_map(|(_, col)| match col {
                Column::Numeric(xs) => Some(xs.iter().sum::<f64>()),
                Column::Text(_) => None,
            })
            .sum()
    };
    let (ta, tb) = (total(a), total(b));
    let mut cats = Vec::new();
    let mut cols: [Vec<f64>; 6] = Default::default();
    for name in a.numeric_names() {
        let Some(Column::Numeric(ys)) = b.column(&name) else {
            continue;
        };
        let Some(Column::Numeric(xs)) = a.column(&name) else {
            continue;
        };
        let (stat, p) = match test {
            "Mann-Whitney U" => {
                let r = inference::mann_whitney(xs, ys)?;
                (r.statistic, r.p_value)
            }
            "Welch t-test" => match inference::welch_t_test(xs, ys) {
                Ok(r) => (r.t, r.p_value),
                // constant in both groups: nothing to test
                Err(StatsError::ZeroVariance) => continue,
                Err(e) => return Err(e.into()),
            },
            other => return Err(CommandError::Invalid(format!("unknown test '{other}'"))),
        };
        cats.push(name);
        for (col, x) in cols.iter_mut().zip([stat, p, xs.iter().sum(), ys.iter().sum(), ta, tb]) {
            col.push(x);
        }
    }
    if cats.is_empty() {
        return Err(CommandError::Invalid(
            "the collections share no testable numeric columns".into(),
        ));
    }
    let names = ["statistic", "p_value", "count_a", "count_b", "total_a", "total_b"];
    let mut columns = vec![("category".to_string(), Column::Text(cats))];
    for (n, c) in names.iter().zip(cols) {
        columns.push((n.to_string(), Column::Numeric(c)));
    }
    Ok(Value::Collection(Collection::new(columns)?))
}

fn lexicon_and_plot_commands() -> Vec<CommandSpec> {
    vec![
        CommandSpec::builder("lexicon_analysis", "lexicon analysis on {documents}")
            .intro("run a lexicon analysis")
            .examples(&[
                "run an analysis using the lexicon",
                "liwc analysis on {documents}",
                "run an analysis using liwc",
                "count lexicon categories in {documents}",
                "lexicon analysis of {documents}",
                "word category counts for {documents}",
            ])
            .help(&[
                "Counts how many words of each document fall in each lexicon category.",
                "Uses the first text column of the collection.",
            ])
            .ask("documents", "Collection", "Where are the documents?")
            .returns(&["Collection"])
            .body(|a, ctx| {
                let c = coll(&a[0], "the documents")?;
                let (_, docs) = c
                    .first_text_column()
                    .ok_or_else(|| CommandError::Invalid("the documents need a text column".into()))?;
                let path = ctx.resolve(&ctx.lexicon.to_string_lossy());
                let lex = lexicon::Lexicon::load(&path)?;
                Ok(Value::Collection(lexicon::lexicon_counts(docs, &lex)?))
            })
            .explain(|v, _| format!("Here are the category counts:\n{}", v.summary()))
            .snippet("def lexicon_analysis(documents, lexicon=\"lexicon.tsv\"):\n    import pandas as pd\n    cats = {}\n    for line in open(lexicon):\n        cat, word = line.rstrip(\"\\n\").split(\"\\t\")\n        cats.setdefault(cat, set()).add(word.lower())\n    docs = documents[documents.select_dtypes(\"object\").columns[0]]\n    return pd.DataFrame({c: [sum(t in ws for t in d.lower().split()) for d in docs] for c, ws in cats.items()})")
            .build()
            .expect("lexicon_analysis"),
        CommandSpec::builder("odds_ratio_plot", "plot odds ratios for {stats}")
            .intro("plot the odds ratios")
            .examples(&[
                "odds ratio plot of {stats}",
                "show the odds ratios in {stats}",
                "chart odds ratios for {stats}",
                "graph the odds ratios of {stats}",
                "compute odds ratios for {stats}",
            ])
            .help(&[
                "Plots a smoothed odds ratio per category, largest first.",
                "Needs category, count_a, count_b, total_a and total_b columns.",
            ])
            .ask("stats", "Collection", "Which statistics should I plot?")
            .returns(&["Plot"])
            .body(|a, _| {
                let c = coll(&a[0], "the statistics")?;
                let cats = match c.column("category") {
                    Some(Column::Text(xs)) => xs.clone(),
                    _ => return Err(StatsError::UnknownColumn("category".into()).into()),
                };
                let (ca, cb) = (numeric_col(c, "count_a")?, numeric_col(c, "count_b")?);
                let (ta, tb) = (numeric_col(c, "total_a")?, numeric_col(c, "total_b")?);
                let mut ratios = Vec::with_capacity(cats.len());
                for i in 0..cats.len() {
                    if ta[i] <= 0.0 || tb[i] <= 0.0 {
                        return Err(StatsError::ZeroTotal.into());
                    }
                    ratios.push(inference::odds_ratio_one(ca[i], cb[i], ta[i], tb[i]));
                }
                Ok(Value::Plot(table::plot_bar(&cats, &ratios, "Odds ratios")?))
            })
            .explain(|_, _| "Sure, I can plot the odds ratios:".to_string())
            .snippet("def odds_ratio_plot(stats):\n    a, b = stats[\"count_a\"], stats[\"count_b\"]\n    ra = (a + 0.5) / (stats[\"total_a\"] - a + 0.5)\n    rb = (b + 0.5) / (stats[\"total_b\"] - b + 0.5)\n    return (ra / rb).set_axis(stats[\"category\"]).sort_values(ascending=False).plot.bar()")
            .build()
            .expect("odds_ratio_plot"),
        CommandSpec::builder("plot_bar", "plot a bar chart of {metric}")
            .intro("plot a bar chart")
            .examples(&[
                "bar chart of {metric}",
                "make a bar plot of {metric}",
                "visualize {metric}",
                "draw a bar chart for {metric}",
                "bar graph of {metric}",
            ])
            .help(&["Draws one bar per entry of a metric, largest first."])
            .ask("metric", "Metric", "Which metric should I plot?")
            .returns(&["Plot"])
            .body(|a, _| match &a[0] {
                Value::Metric(m) => {
                    let cats: Vec<String> = m.0.keys().cloned().collect();
                    let vals: Vec<f64> = m.0.values().copied().collect();
                    Ok(Value::Plot(table::plot_bar(&cats, &vals, "Bar chart")?))
                }
                other => Err(CommandError::Invalid(format!("expected a Metric, not {}", other.type_name()))),
            })
            .explain(|_, _| "Here is the bar chart:".to_string())
            .snippet("def plot_bar(metric):\n    import pandas as pd\n    return pd.Series(metric).sort_values(ascending=False).plot.bar()")
            .build()
            .expect("plot_bar"),
    ]
}

fn model_commands() -> Vec<CommandSpec> {
    vec![
        CommandSpec::builder(
            "create_classifier",
            "create a classification model with {features} and {labels}",
        )
        .intro("create a classification model")
        .examples(&[
            "logistic regression",
            "create a classification model",
            "build a classifier",
            "train a logistic regression on {features} and {labels}",
            "make a new logistic regression classifier",
            "classify {labels} using {features}",
            "fit a classifier to {features} and {labels}",
        ])
        .help(&[
            "Trains a multinomial logistic regression on standardized features.",
            "Labels come from the first text column of the label collection.",
        ])
        .ask("features", "Collection", "Which features should the model use?")
        .ask("labels", "Collection", "Where are the labels?")
        .returns(&["Model"])
        .body(|a, ctx| {
            let f = model::Features::from_collection(coll(&a[0], "the features")?)?;
            let labels = labels_of(coll(&a[1], "the labels")?)?;
            Ok(Value::Model(model::train_logistic(&f, &labels, ctx.seed)?))
        })
        .explain(|v, _| format!("I trained this model:\n{}", v.summary()))
        .snippet("def create_classifier(features, labels):\n    from sklearn.linear_model import LogisticRegression\n    from sklearn.pipeline import make_pipeline\n    from sklearn.preprocessing import StandardScaler\n    return make_pipeline(StandardScaler(), LogisticRegression()).fit(features, labels.iloc[:, 0])")
        .build()
        .expect("create_classifier"),
        CommandSpec::builder("create_regression", "create a regression model with {features} and {target}")
            .intro("create a regression model")
            .examples(&[
                "make a regression model",
                "create a regression model",
                "linear regression",
                "make a model to predict {target} from {features}",
                "fit a linear model on {features} and {target}",
                "predict {target} from {features}",
            ])
            .help(&["Fits a least squares linear model on standardized features."])
            .ask("features", "Collection", "Which features should the model use?")
            .ask("target", "Array", "What array should the model predict?")
            .returns(&["Model"])
            .body(|a, ctx| {
                let f = model::Features::from_collection(coll(&a[0], "the features")?)?;
                Ok(Value::Model(model::train_linear(&f, arr(&a[1], "the target")?, ctx.seed)?))
            })
            .explain(|v, _| format!("I trained this model:\n{}", v.summary()))
            .snippet("def create_regression(features, target):\n    from sklearn.linear_model import LinearRegression\n    return LinearRegression().fit(features, target)")
            .build()
            .expect("create_regression"),
        CommandSpec::builder(
            "cross_validate",
            "cross-validate {model} with {features} and {labels} using {folds} folds",
        )
        .intro("cross-validate a model")
        .examples(&[
            "cross-validate",
            "cross validate {model}",
            "cross-validate {model} on {features} and {labels}",
            "cross-validate {model} with accuracy and {folds} folds",
            "evaluate {model} with {folds} fold cross validation",
            "how well does {model} do",
        ])
        .help(&[
            "Scores a classifier with stratified k-fold cross-validation.",
            "Each fold reports accuracy on rows the model was not trained on.",
        ])
        .ask("model", "Model", "What model do you want to use?")
        .ask("features", "Collection", "Which features should I use?")
        .ask("labels", "Collection", "Where are the labels?")
        .ask("folds", "Int", "How many folds?")
        .returns(&["Array"])
        .kind(CommandKind::Random)
        .body(|a, ctx| {
            let m = model_ref(&a[0])?;
            if m.kind != ModelKind::LogisticClassifier {
                return Err(CommandError::Invalid(
                    "cross-validation reports accuracy, which needs a classifier".into(),
                ));
            }
            let c = coll(&a[1], "the features")?;
            let c = if m.trained { table::select_columns(c, &m.feature_names)? } else { c.clone() };
            let f = model::Features::from_collection(&c)?;
            let labels = labels_of(coll(&a[2], "the labels")?)?;
            Ok(Value::array(model::cross_validate(&f, &labels, int(&a[3], "folds")?, ctx.seed)?)?)
        })
        .explain(|v, _| match v {
            Value::Array(a) => format!(
                "Accuracy across {} folds: {}, with a mean of {}",
                a.len(),
                fmt_array(a.as_slice(), 10),
                round4(stats::descriptive::mean(a.as_slice()).unwrap_or(f64::NAN))
            ),
            other => other.summary(),
        })
        .snippet("def cross_validate(model, features, labels, folds, seed=None):\n    from sklearn.model_selection import StratifiedKFold, cross_val_score\n    cv = StratifiedKFold(folds, shuffle=True, random_state=seed % 2**32)\n    return cross_val_score(model, features, labels.iloc[:, 0], cv=cv, scoring=\"accuracy\")")
        .build()
        .expect("cross_validate"),
        CommandSpec::builder("coefficients", "show the coefficients of {model}")
            .intro("show model coefficients")
            .examples(&[
                "coefficients of {model}",
                "what are the coefficients for {model}",
                "inspect the coefficients of {model}",
                "feature weights of {model}",
                "show me the weights of {model}",
            ])
            .help(&[
                "Lists the model's weights on standardized features.",
                "Classifiers have one column per class.",
            ])
            .ask("model", "Model", "Which model?")
            .returns(&["Collection"])
            .body(|a, _| {
                let m = model_ref(&a[0])?;
                if !m.trained {
                    return Err(CommandError::Invalid("the model has not been trained".into()));
                }
                let mut cols = vec![("feature".to_string(), Column::Text(m.feature_names.clone()))];
                let heads: Vec<String> = if m.classes.is_empty() {
                    vec!["coefficient".to_string()]
                } else {
                    m.classes.clone()
                };
                for (h, w) in heads.into_iter().zip(&m.weights) {
                    cols.push((h, Column::Numeric(w.clone())));
                }
                Ok(Value::Collection(Collection::new(cols)?))
            })
            .explain(|v, _| format!("Here are the coefficients:\n{}", v.preview()))
            .snippet("def coefficients(model):\n    import pandas as pd\n    est = model[-1] if hasattr(model, \"steps\") else model\n    return pd.DataFrame(est.coef_.T, index=model.feature_names_in_)")
            .build()
            .expect("coefficients"),
    ]
}

fn misc_commands() -> Vec<CommandSpec> {
    vec![
        arith(
            "add",
            "add {x} and {y}",
            |x, y| x + y,
            "+",
            &[
                "add {x} to {y}",
                "sum of {x} and {y}",
                "{x} plus {y}",
                "what is {x} + {y}",
                "compute {x} plus {y}",
            ],
        ),
        arith(
            "subtract",
            "subtract {y} from {x}",
            |x, y| x - y,
            "-",
            &[
                "{x} minus {y}",
                "difference of {x} and {y}",
                "take {y} away from {x}",
                "compute {x} minus {y}",
                "what is {x} - {y}",
            ],
        ),
        arith(
            "multiply",
            "multiply {x} by {y}",
            |x, y| x * y,
            "*",
            &[
                "{x} times {y}",
                "product of {x} and {y}",
                "multiply {x} and {y}",
                "compute {x} times {y}",
                "what is {x} * {y}",
            ],
        ),
        CommandSpec::builder("help", "explain what you did")
            .intro("explain the last command")
            .examples(&[
                "can you tell me more about what you did",
                "what did you just do",
                "help",
                "explain the last command",
                "tell me more",
            ])
            .help(&["Shows help for the most recent command."])
            .returns(&["Unit"])
            .kind(CommandKind::Meta(MetaKind::Help))
            .snippet("def help():\n    pass")
            .build()
            .expect("help"),
        CommandSpec::builder("export", "export this conversation as a script")
            .intro("export the conversation")
            .examples(&[
                "export this conversation",
                "export the script",
                "give me the python code",
                "export as a script",
                "show me the code for this conversation",
            ])
            .help(&["Turns the conversation so far into a script."])
            .returns(&["Unit"])
            .kind(CommandKind::Meta(MetaKind::Export))
            .snippet("def export():\n    pass")
            .build()
            .expect("export"),
    ]
}

/// Builds the full pack.
pub fn datasci_pack() -> CommandRegistry {
    let mut reg = CommandRegistry::new();
    for spec in data_commands()
        .into_iter()
        .chain(descriptive_commands())
        .chain(test_commands())
        .chain(lexicon_and_plot_commands())
        .chain(model_commands())
        .chain(misc_commands())
    {
        reg.register(spec).expect("pack command ids are unique");
    }
    reg
}

/// Problems that would make a pack unfit to ship; empty when fine.
pub fn check_pack(reg: &CommandRegistry) -> Vec<String> {
    let mut problems = Vec::new();
    if reg.len() < MIN_COMMANDS {
        problems.push(format!("only {} commands, need {MIN_COMMANDS}", reg.len()));
    }
    for c in reg.iter() {
        if c.examples.len() < MIN_EXAMPLES {
            problems.push(format!(
                "'{}' has {} examples, need {MIN_EXAMPLES}",
                c.id,
                c.examples.len()
            ));
        }
        if c.source_snippet.is_empty() {
            problems.push(format!("'{}' has no source snippet", c.id));
        }
        if c.help_text.is_empty() {
            problems.push(format!("'{}' has no help text", c.id));
        }
    }
    problems
}

/// The context commands run with when nothing else is configured.
pub fn default_ctx() -> ExecCtx {
    ExecCtx::default()
}
