use std::path::Path;
use std::sync::Arc;

use colloquy_core::codegen::Stmt;
use colloquy_core::engine::{Engine, EngineConfig};
use colloquy_core::session::{AgentResponse, Session};
use colloquy_core::value::Value;

fn config() -> EngineConfig {
    EngineConfig {
        data_dir: Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data"),
        ..EngineConfig::default()
    }
}

fn session_with(cfg: EngineConfig) -> Session {
    Session::new(Arc::new(Engine::with_pack(cfg).unwrap()), 0)
}

fn session() -> Session {
    session_with(config())
}

fn arr(xs: &[f64]) -> Value {
    Value::array(xs.to_vec()).unwrap()
}

fn texts(rs: &[AgentResponse]) -> Vec<String> {
    rs.iter().map(|r| r.text().to_string()).collect()
}

fn say(s: &mut Session, text: &str) -> Vec<AgentResponse> {
    s.handle_input(text)
}

#[test]
fn quartiles_asks_for_an_array() {
    let mut s = session();
    let out = say(&mut s, "find quartiles");
    assert_eq!(
        out.last().unwrap(),
        &AgentResponse::Ask {
            prompt: "What is the array you want to analyze?".into(),
            expected_type: "Array".into(),
            options: vec![],
        }
    );
    assert!(s.in_progress());
    assert_eq!(s.pending().unwrap().expected_type, "Array");
}

#[test]
fn help_describes_last_command() {
    let mut s = session();
    let out = say(&mut s, "can you tell me more about what you did?");
    assert_eq!(texts(&out), ["I haven't run any commands yet."]);
    s.bind("a", arr(&[1.0, 2.0, 3.0, 4.0])).unwrap();
    say(&mut s, "compute the mean of a");
    let out = say(&mut s, "can you tell me more about what you did?");
    let AgentResponse::ShowHelp { text } = &out[0] else {
        panic!("{out:?}")
    };
    assert_eq!(text, "Averages the values of an array.");
    assert!(s.ast().statements.len() == 1, "help is not recorded");
}

#[test]
fn pearson_between_bound_arrays() {
    let mut s = session();
    s.bind("a", arr(&[1.0, 2.0, 3.0, 4.0])).unwrap();
    s.bind("b", arr(&[2.0, 4.0, 6.0, 8.5])).unwrap();
    let out = say(&mut s, "pearson correlation between a and b");
    assert_eq!(out.len(), 1, "{out:?}");
    let AgentResponse::ShowValue { explanation, value } = &out[0] else {
        panic!("{out:?}")
    };
    let Value::Metric(m) = value else { panic!() };
    let r = m.get("correlation").unwrap();
    // round half away from zero at four places
    let want = format!(
        "Correlation of {} with p-value of {}",
        (r * 1e4).round() / 1e4,
        (m.get("p_value").unwrap() * 1e4).round() / 1e4
    );
    assert_eq!(explanation, &want);
}

#[test]
fn pronoun_binds_last_result() {
    let mut s = session();
    s.bind("a", arr(&[1.0, 2.0, 3.0, 4.0])).unwrap();
    say(&mut s, "log-transform a");
    let out = say(&mut s, "compute the mean of that");
    let AgentResponse::ShowValue { value, .. } = &out[0] else {
        panic!("{out:?}")
    };
    let want = (1f64.ln() + 2f64.ln() + 3f64.ln() + 4f64.ln()) / 4.0;
    assert_eq!(value, &Value::Real(want));
    assert_eq!(s.env().history().len(), 2);
}

#[test]
fn failed_body_rolls_back() {
    let mut s = session();
    s.bind("a", arr(&[1.0])).unwrap();
    s.bind("b", arr(&[2.0])).unwrap();
    say(&mut s, "compute the mean of a");
    let env = s.env().clone();
    let ast = s.ast().clone();
    let out = say(&mut s, "pearson correlation between a and b");
    assert!(matches!(out.last(), Some(AgentResponse::Error { .. })), "{out:?}");
    assert_eq!(s.env(), &env);
    assert_eq!(s.ast(), &ast);
    assert!(!s.in_progress());
}

#[test]
fn failed_nested_body_rolls_back_the_whole_request() {
    let mut s = session();
    s.bind("one", arr(&[1.0])).unwrap();
    let env = s.env().clone();
    say(&mut s, "compute the mean");
    let out = say(&mut s, "log-transform one");
    assert!(!matches!(out.last(), Some(AgentResponse::Error { .. })), "{out:?}");
    assert_eq!(s.env().history().len(), 2, "nested results join history");
    s.bind("z", arr(&[0.0, 1.0])).unwrap();
    say(&mut s, "compute the variance");
    let out = say(&mut s, "log-transform z");
    assert!(matches!(out.last(), Some(AgentResponse::Error { .. })), "{out:?}");
    assert_eq!(s.env().history().len(), 2);
    assert_eq!(s.env().bindings().count(), env.bindings().count() + 1);
}

#[test]
fn never_mind_unwinds() {
    let mut s = session();
    let out = say(&mut s, "never mind");
    assert_eq!(texts(&out), ["There's nothing to cancel."]);
    say(&mut s, "compute pearson correlation");
    assert!(s.in_progress());
    let out = say(&mut s, "Never mind");
    assert_eq!(texts(&out), ["Okay, I've cancelled that."]);
    assert!(!s.in_progress());
    assert!(s.ast().statements.is_empty());
    assert!(s.pending().is_none());
}

#[test]
fn option_phrase_is_learned() {
    let mut s = session();
    s.bind("x", arr(&[1.0, 2.0, 3.0])).unwrap();
    say(&mut s, "load dogmatism.csv");
    say(&mut s, "save that as d");
    say(&mut s, "liwc analysis on d");
    say(&mut s, "save that as p");
    say(&mut s, "liwc analysis on d");
    say(&mut s, "save that as q");
    let first = say(&mut s, "run Mann-Whitney tests between the columns in p and q");
    assert_eq!(
        first.last().unwrap(),
        &AgentResponse::Ask {
            prompt: "What test would you like to run?".into(),
            expected_type: "String".into(),
            options: vec!["Mann-Whitney U".into(), "Welch t-test".into()],
        }
    );
    say(&mut s, "Mann-Whitney U");
    let again = say(&mut s, "run Mann-Whitney tests between the columns in q and p");
    assert_eq!(again.len(), 1, "{again:?}");
    assert!(matches!(again[0], AgentResponse::ShowValue { .. }));
    assert_eq!(
        s.engine().synonyms("compare_collections")["test"].get("mann-whitney"),
        Some(&"Mann-Whitney U".to_string())
    );
    // last selection wins
    s.engine()
        .record_option_synonym("compare_collections", "test", "Mann-Whitney", "Welch t-test");
    assert_eq!(
        s.engine().synonyms("compare_collections")["test"].get("mann-whitney"),
        Some(&"Welch t-test".to_string())
    );
}

#[test]
fn single_option_conversion_applies_when_enabled() {
    let run = |auto: bool| {
        let mut s = session_with(EngineConfig {
            auto_single_option: auto,
            ..config()
        });
        say(&mut s, "load dogmatism.csv");
        say(&mut s, "save that as d");
        say(&mut s, "find quartiles");
        say(&mut s, "d")
    };
    let manual = run(false);
    assert!(manual.last().unwrap().text().starts_with("I need an Array"));
    let auto = run(true);
    assert_eq!(auto[0].text(), "Great, I'm using score");
    assert!(matches!(auto.last(), Some(AgentResponse::ShowValue { .. })));
}

#[test]
fn conversion_refusal_and_bad_choice() {
    let mut s = session();
    say(&mut s, "load flowers.csv");
    say(&mut s, "save that as f");
    say(&mut s, "find quartiles");
    say(&mut s, "f");
    let out = say(&mut s, "maybe");
    assert!(out[0].text().starts_with("Please answer yes or no."));
    say(&mut s, "yes");
    let out = say(&mut s, "petal");
    assert!(
        out[0].text().starts_with("Sorry, 'petal' isn't one of the options."),
        "{out:?}"
    );
    let out = say(&mut s, "petal_width");
    assert!(matches!(out.last(), Some(AgentResponse::ShowValue { .. })), "{out:?}");
    let Stmt::Expr { call } = &s.ast().statements.last().unwrap().stmt else {
        panic!()
    };
    assert_eq!(call.command, "quartiles");
}

#[test]
fn nesting_stops_at_the_depth_cap() {
    let mut s = session_with(EngineConfig {
        depth_cap: 2,
        ..config()
    });
    say(&mut s, "add 1 to");
    assert!(s.in_progress());
    let mut last = Vec::new();
    for _ in 0..3 {
        last = say(&mut s, "add 1 to");
    }
    assert!(
        texts(&last).iter().any(|t| t.contains("nests requests too deeply")),
        "{last:?}"
    );
    assert!(s.stack_depth() <= 2);
}

#[test]
fn nested_arithmetic_keeps_scopes_apart() {
    let mut s = session();
    say(&mut s, "multiply");
    say(&mut s, "add 2 and 3");
    let out = say(&mut s, "subtract 4 from 10");
    let AgentResponse::ShowValue { value, .. } = out.last().unwrap() else {
        panic!("{out:?}")
    };
    assert_eq!(value, &Value::Real(30.0));
    assert_eq!(
        s.export_script().unwrap().lines().last().unwrap(),
        "multiply(add(2.0, 3.0), subtract(10.0, 4.0))"
    );
}

#[test]
fn novel_request_is_learned() {
    let mut s = session();
    s.bind("a", arr(&[1.0, 2.0, 6.0])).unwrap();
    let first = say(&mut s, "what's the typical value of a");
    assert_eq!(s.last_dispatched(), Some("mean"), "{first:?}");
    say(&mut s, "a");
    let learned = s.engine().learned_templates("mean");
    assert!(!learned.is_empty());
    s.bind("b", arr(&[4.0, 8.0])).unwrap();
    let out = say(&mut s, "what's the typical value of b");
    assert_eq!(out.len(), 1, "{out:?}");
    let AgentResponse::ShowValue { value, .. } = &out[0] else {
        panic!()
    };
    assert_eq!(value, &Value::Real(6.0));
}

#[test]
fn correction_relabels_the_request() {
    let mut s = session();
    say(&mut s, "load flowers.csv");
    say(&mut s, "save that as flowers");
    say(&mut s, "make model");
    assert_eq!(s.last_dispatched(), Some("create_regression"));
    let out = say(&mut s, "no, I meant build a classifier");
    assert!(out[0].text().starts_with("Got it."), "{out:?}");
    assert_eq!(s.last_dispatched(), Some("create_classifier"));
    assert_eq!(s.engine().classify("make model").id, "create_classifier");
}

#[test]
fn hints_track_drafts_and_pending_questions() {
    let mut s = session();
    let h = s.hints("quartiles");
    assert_eq!(h.ranked[0].hint_text, "compute quartiles for an {array}");
    assert_eq!(h.ranked.len(), 5);
    assert_eq!(s.hints(""), s.hints(""));
    assert_eq!(s.hints("").ranked.len(), s.engine().commands().len());
    s.bind("dogmatism_data", Value::Unit).ok();
    say(&mut s, "load dogmatism.csv");
    say(&mut s, "save that as dogmatism_data");
    let h = s.hints("filter collection dogmatism_data with score column less than 7");
    assert_eq!(
        h.ranked[0].hint_text,
        "filter collection {dogmatism_data} with {score} column less than {7}"
    );
    say(&mut s, "find quartiles");
    let h = s.hints("the score column");
    assert_eq!(h.pending.unwrap().prompt, "What is the array you want to analyze?");
}

#[test]
fn export_without_commands_is_empty_script() {
    let s = session();
    assert_eq!(s.export_script().unwrap().trim(), "");
}

#[test]
fn preload_appears_in_export() {
    let mut s = session();
    s.preload("dogmatism data", "dogmatism.csv").unwrap();
    say(&mut s, "get the score column from dogmatism_data");
    let script = s.export_script().unwrap();
    assert!(
        script.contains("dogmatism_data = load_csv(\"dogmatism.csv\")\n"),
        "{script}"
    );
    assert!(
        script.ends_with("select_column(\"score\", dogmatism_data)\n"),
        "{script}"
    );
    assert_eq!(s.env_snapshot()[0].name, "dogmatism_data");
    assert_eq!(s.env_snapshot()[0].type_name, "Collection");
}

#[test]
fn sidecars_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EngineConfig {
        templates_path: Some(dir.path().join("templates.jsonl")),
        examples_path: Some(dir.path().join("examples.jsonl")),
        synonyms_path: Some(dir.path().join("synonyms.jsonl")),
        ..config()
    };
    {
        let mut s = session_with(cfg.clone());
        s.bind("a", arr(&[1.0, 2.0])).unwrap();
        say(&mut s, "what's the typical value of a");
        say(&mut s, "a");
        say(&mut s, "make model");
        say(&mut s, "no, I meant build a classifier");
        s.engine()
            .record_option_synonym("compare_collections", "test", "welch", "Welch t-test");
    }
    let e = Engine::with_pack(cfg).unwrap();
    assert!(!e.learned_templates("mean").is_empty());
    assert_eq!(e.classify("make model").id, "create_classifier");
    assert_eq!(
        e.synonyms("compare_collections")["test"].get("welch"),
        Some(&"Welch t-test".to_string())
    );
}

#[test]
fn empty_input_is_an_error_turn() {
    let mut s = session();
    let out = say(&mut s, "   ");
    assert!(matches!(out[0], AgentResponse::Error { .. }));
}
