use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use proptest::prelude::*;

use colloquy_core::engine::{Engine, EngineConfig, Hint};
use colloquy_core::service::{ClientMessage, ErrorCode, Frame, ServerMessage, Service, PROTOCOL_VERSION};
use colloquy_core::session::{AgentResponse, EnvVar, PendingAsk};
use colloquy_core::value::Value;

fn engine() -> Arc<Engine> {
    let cfg = EngineConfig {
        data_dir: Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data"),
        learning: false,
        ..EngineConfig::default()
    };
    Arc::new(Engine::with_pack(cfg).unwrap())
}

fn shared() -> &'static Service {
    static S: OnceLock<Service> = OnceLock::new();
    S.get_or_init(|| Service::new(engine(), 0, Duration::from_secs(1800)))
}

fn created(svc: &Service) -> String {
    match svc.handle(ClientMessage::CreateSession) {
        ServerMessage::SessionCreated { session } => session,
        other => panic!("{other:?}"),
    }
}

fn send(svc: &Service, session: &str, text: &str) -> Vec<AgentResponse> {
    match svc.handle(ClientMessage::UserMessage {
        session: session.into(),
        text: text.into(),
    }) {
        ServerMessage::AgentTurn { responses } => responses,
        other => panic!("{other:?}"),
    }
}

#[test]
fn sessions_are_distinct_and_start_empty() {
    let svc = shared();
    let (a, b) = (created(svc), created(svc));
    assert_ne!(a, b);
    assert_eq!(
        svc.handle(ClientMessage::ListEnv { session: a.clone() }),
        ServerMessage::EnvSnapshot { vars: vec![] }
    );
    let ServerMessage::Hints { ranked, pending } = svc.handle(ClientMessage::HintQuery {
        session: a,
        partial_text: String::new(),
    }) else {
        panic!()
    };
    assert_eq!(ranked.len(), svc.engine().commands().len());
    assert!(pending.is_none());
}

#[test]
fn unknown_session_gets_an_error() {
    for msg in [
        ClientMessage::UserMessage {
            session: "nope".into(),
            text: "hi".into(),
        },
        ClientMessage::HintQuery {
            session: "nope".into(),
            partial_text: "hi".into(),
        },
        ClientMessage::SelectOption {
            session: "nope".into(),
            label: "yes".into(),
        },
        ClientMessage::ExportScript { session: "nope".into() },
        ClientMessage::ListEnv { session: "nope".into() },
    ] {
        assert!(matches!(
            shared().handle(msg),
            ServerMessage::ErrorMsg {
                code: ErrorCode::UnknownSession,
                ..
            }
        ));
    }
}

#[test]
fn message_flow_and_export() {
    let svc = shared();
    let id = created(svc);
    let out = send(svc, &id, "find quartiles");
    assert!(matches!(out.last(), Some(AgentResponse::Ask { .. })));
    let ServerMessage::Hints { pending, .. } = svc.handle(ClientMessage::HintQuery {
        session: id.clone(),
        partial_text: "the score".into(),
    }) else {
        panic!()
    };
    assert_eq!(pending.unwrap().prompt, "What is the array you want to analyze?");
    send(svc, &id, "never mind");
    send(svc, &id, "load dogmatism.csv");
    send(svc, &id, "save that as dogmatic posts");
    let ServerMessage::EnvSnapshot { vars } = svc.handle(ClientMessage::ListEnv { session: id.clone() }) else {
        panic!()
    };
    assert_eq!(vars.len(), 1);
    assert_eq!(vars[0].name, "dogmatic_posts");
    assert_eq!(vars[0].type_name, "Collection");
    assert!(
        vars[0].preview.starts_with("<Collection: [post, score, category]>"),
        "{}",
        vars[0].preview
    );
    send(svc, &id, "find quartiles");
    send(svc, &id, "dogmatic_posts");
    let out = match svc.handle(ClientMessage::SelectOption {
        session: id.clone(),
        label: "yes".into(),
    }) {
        ServerMessage::AgentTurn { responses } => responses,
        other => panic!("{other:?}"),
    };
    let AgentResponse::Ask { options, .. } = out.last().unwrap() else {
        panic!("{out:?}")
    };
    assert_eq!(options, &["score"]);
    svc.handle(ClientMessage::SelectOption {
        session: id.clone(),
        label: "score".into(),
    });
    let ServerMessage::Script { text } = svc.handle(ClientMessage::ExportScript { session: id }) else {
        panic!()
    };
    assert!(
        text.trim_end()
            .ends_with("quartiles(select_column(\"score\", dogmatic_posts))"),
        "{text}"
    );
}

#[test]
fn plots_travel_as_specs() {
    let svc = shared();
    let id = created(svc);
    for line in [
        "load dogmatism.csv",
        "save that as d",
        "give me rows in d with score greater than 12",
        "save that as hi",
        "give me rows in d with score less than 7",
        "save that as lo",
        "liwc analysis on hi",
        "save that as hi_liwc",
        "liwc analysis on lo",
        "save that as lo_liwc",
        "run Mann-Whitney tests between the columns in hi_liwc and lo_liwc",
    ] {
        send(svc, &id, line);
    }
    let frame = svc.handle_text(&format!(
        "{{\"version\":1,\"type\":\"UserMessage\",\"session\":\"{id}\",\"text\":\"Mann-Whitney U\"}}"
    ));
    assert!(frame.contains("\"type\":\"AgentTurn\""), "{frame}");
    send(svc, &id, "save that in stats");
    let out = send(svc, &id, "plot odds ratios for the stats");
    let json = serde_json::to_value(&out).unwrap();
    let plot = &json[0]["value"];
    assert_eq!(plot["type"], "Plot", "{json}");
    assert_eq!(plot["value"]["kind"], "bar");
    assert!(plot["value"]["categories"].is_array());
}

#[test]
fn frames_carry_version_and_type() {
    let svc = shared();
    let v: serde_json::Value =
        serde_json::from_str(&svc.handle_text("{\"version\":1,\"type\":\"CreateSession\"}")).unwrap();
    assert_eq!(v["version"], PROTOCOL_VERSION);
    assert_eq!(v["type"], "SessionCreated");
    let bad = svc.handle_frame("{\"version\":2,\"type\":\"CreateSession\"}");
    assert!(matches!(
        bad.body,
        ServerMessage::ErrorMsg {
            code: ErrorCode::VersionMismatch,
            ..
        }
    ));
    for raw in [
        "",
        "{",
        "[]",
        "{\"type\":\"CreateSession\"}",
        "{\"version\":1,\"type\":\"Nope\"}",
        "{\"version\":1,\"type\":\"UserMessage\"}",
    ] {
        assert!(
            matches!(
                svc.handle_frame(raw).body,
                ServerMessage::ErrorMsg {
                    code: ErrorCode::MalformedFrame,
                    ..
                }
            ),
            "{raw}"
        );
    }
}

#[test]
fn idle_sessions_are_evicted() {
    let svc = Service::new(engine(), 0, Duration::from_secs(60));
    let a = created(&svc);
    created(&svc);
    assert_eq!(svc.evict_idle_at(Instant::now()), 0);
    assert_eq!(svc.evict_idle_at(Instant::now() + Duration::from_secs(61)), 2);
    assert!(matches!(
        svc.handle(ClientMessage::ListEnv { session: a }),
        ServerMessage::ErrorMsg {
            code: ErrorCode::UnknownSession,
            ..
        }
    ));
}

#[test]
fn sessions_run_concurrently() {
    let svc = Arc::new(Service::new(engine(), 0, Duration::from_secs(60)));
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let svc = svc.clone();
            std::thread::spawn(move || {
                let id = created(&svc);
                let out = send(&svc, &id, &format!("add {i} to 1"));
                match out.last() {
                    Some(AgentResponse::ShowValue { value, .. }) => value.clone(),
                    other => panic!("{other:?}"),
                }
            })
        })
        .collect();
    for (i, h) in handles.into_iter().enumerate() {
        assert_eq!(h.join().unwrap(), Value::Real(i as f64 + 1.0));
    }
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 _'.?-]{0,24}"
}

fn client_message() -> impl Strategy<Value = ClientMessage> {
    prop_oneof![
        Just(ClientMessage::CreateSession),
        (text(), text()).prop_map(|(session, text)| ClientMessage::UserMessage { session, text }),
        (text(), text()).prop_map(|(session, partial_text)| ClientMessage::HintQuery { session, partial_text }),
        (text(), text()).prop_map(|(session, label)| ClientMessage::SelectOption { session, label }),
        text().prop_map(|session| ClientMessage::ExportScript { session }),
        text().prop_map(|session| ClientMessage::ListEnv { session }),
    ]
}

fn response() -> impl Strategy<Value = AgentResponse> {
    prop_oneof![
        text().prop_map(|text| AgentResponse::Say { text }),
        (text(), text(), prop::collection::vec(text(), 0..3)).prop_map(|(prompt, expected_type, options)| {
            AgentResponse::Ask {
                prompt,
                expected_type,
                options,
            }
        }),
        (-1e6f64..1e6, text()).prop_map(|(x, explanation)| AgentResponse::ShowValue {
            value: Value::Real(x),
            explanation
        }),
        (prop::collection::vec(-1e6f64..1e6, 1..4), text()).prop_map(|(xs, explanation)| {
            AgentResponse::ShowValue {
                value: Value::array(xs).unwrap(),
                explanation,
            }
        }),
        text().prop_map(|text| AgentResponse::ShowHelp { text }),
        text().prop_map(|text| AgentResponse::Error { text }),
    ]
}

fn server_message() -> impl Strategy<Value = ServerMessage> {
    prop_oneof![
        text().prop_map(|session| ServerMessage::SessionCreated { session }),
        prop::collection::vec(response(), 0..4).prop_map(|responses| ServerMessage::AgentTurn { responses }),
        (
            prop::collection::vec((text(), text(), -10.0f64..10.0), 0..4),
            prop::option::of((text(), text()))
        )
            .prop_map(|(hs, p)| ServerMessage::Hints {
                ranked: hs
                    .into_iter()
                    .map(|(command_id, hint_text, score)| Hint {
                        command_id,
                        hint_text,
                        score
                    })
                    .collect(),
                pending: p.map(|(prompt, expected_type)| PendingAsk {
                    prompt,
                    expected_type,
                    options: vec![]
                }),
            }),
        prop::collection::vec((text(), text(), text()), 0..3).prop_map(|vs| ServerMessage::EnvSnapshot {
            vars: vs
                .into_iter()
                .map(|(name, type_name, preview)| EnvVar {
                    name,
                    type_name,
                    preview
                })
                .collect()
        }),
        text().prop_map(|text| ServerMessage::Script { text }),
        text().prop_map(|text| ServerMessage::ErrorMsg {
            code: ErrorCode::MalformedFrame,
            text
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn client_frames_round_trip(m in client_message()) {
        let f = Frame::new(m);
        let back: Frame<ClientMessage> = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn server_frames_round_trip(m in server_message()) {
        let f = Frame::new(m);
        let back: Frame<ServerMessage> = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn any_frame_gets_one_answer(raw in ".{0,80}") {
        let out = shared().handle_text(&raw);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        prop_assert_eq!(v["version"].as_u64(), Some(u64::from(PROTOCOL_VERSION)));
    }

    #[test]
    fn hint_queries_do_not_change_turns(drafts in prop::collection::vec("[a-z ]{0,20}", 0..6)) {
        let svc = shared();
        let (a, b) = (created(svc), created(svc));
        let script = ["load dogmatism.csv", "save that as d", "find quartiles", "d", "yes", "score"];
        for line in script {
            for d in &drafts {
                svc.handle(ClientMessage::HintQuery { session: b.clone(), partial_text: d.clone() });
            }
            prop_assert_eq!(send(svc, &a, line), send(svc, &b, line));
        }
    }
}
