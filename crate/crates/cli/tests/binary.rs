use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn core_tests(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests").join(sub)
}

fn colloquy(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_colloquy"));
    cmd.args(args)
        .env("COLLOQUY_DATA_DIR", core_tests("data"))
        .env("COLLOQUY_LEARNING", "false")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn golden_replay_exits_zero() {
    let t = core_tests("transcripts/fig2b.jsonl");
    let out = colloquy(&["--replay", t.to_str().unwrap()], "", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(
        stdout(&out).trim_end().ends_with("6 of 6 turns passed"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn failing_replay_exits_one_and_reports_every_turn() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(core_tests("transcripts/fig2c.jsonl")).unwrap();
    let bad = src.replacen("The variance is", "The varience is", 1);
    assert_ne!(src, bad);
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, bad).unwrap();
    let out = colloquy(&["--replay", path.to_str().unwrap()], "", &[]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert_eq!(text.matches(" FAIL: ").count(), 1, "{text}");
    assert!(text.contains("turn 1 PASS: load dogmatism.csv"));
}

#[test]
fn replay_is_byte_identical() {
    let t = core_tests("transcripts/evaluation.jsonl");
    let a = colloquy(&["--replay", t.to_str().unwrap(), "--seed", "9"], "", &[]);
    let b = colloquy(&["--replay", t.to_str().unwrap(), "--seed", "9"], "", &[]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn startup_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_toml = dir.path().join("bad.toml");
    std::fs::write(&bad_toml, "seed = \"many\"").unwrap();
    let malformed = dir.path().join("bad.jsonl");
    std::fs::write(&malformed, "{\"role\":\"agent\",\"text\":\"x\"}").unwrap();
    let missing = dir.path().join("missing.toml");
    for (args, env) in [
        (vec!["--config", bad_toml.to_str().unwrap()], vec![]),
        (vec!["--config", missing.to_str().unwrap()], vec![]),
        (vec!["--replay", malformed.to_str().unwrap()], vec![]),
        (vec![], vec![("COLLOQUY_SEED", "x")]),
        (vec![], vec![("COLLOQUY_NOPE", "1")]),
        (vec!["--load", "no_equals_sign"], vec![]),
        (vec!["--load", "d=missing.csv"], vec![]),
    ] {
        let out = colloquy(&args, "", &env);
        assert_eq!(out.status.code(), Some(2), "{args:?} {env:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn selftest_passes() {
    let out = colloquy(&["--selftest"], "", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("selftest passed"));
}

#[test]
fn repl_prints_hints_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("out.py");
    let out = colloquy(
        &["--export", script.to_str().unwrap()],
        "find quartiles\nthe score column in d\n",
        &[],
    );
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("  hint: compute quartiles for an {array}\n"), "{text}");
    assert!(text.contains("What is the array you want to analyze?"), "{text}");
    let hint = text.find("hint: compute quartiles").unwrap();
    assert!(hint < text.find("What is the array").unwrap());

    let out = colloquy(
        &["--export", script.to_str().unwrap(), "--load", "d=dogmatism.csv"],
        "find quartiles\nthe score column in d\nquit\nmean of d\n",
        &[],
    );
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("Q1 is from 1.0 to 5.25"), "{text}");
    assert!(!text.contains("mean"), "input after quit is ignored: {text}");
    let exported = std::fs::read_to_string(&script).unwrap();
    assert!(exported.contains("d = load_csv(\"dogmatism.csv\")"), "{exported}");
    assert!(
        exported.trim_end().ends_with("quartiles(select_column(\"score\", d))"),
        "{exported}"
    );
}

#[test]
fn plots_render_as_text_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("charts");
    let lines = [
        "give me rows in d with score greater than 12",
        "save that as hi",
        "give me rows in d with score less than 7",
        "save that as lo",
        "liwc analysis on hi",
        "save that as hi_liwc",
        "liwc analysis on lo",
        "save that as lo_liwc",
        "run Mann-Whitney tests between the columns in hi_liwc and lo_liwc",
        "Mann-Whitney U",
        "save that in stats",
        "plot odds ratios for the stats",
    ]
    .join("\n");
    let out = colloquy(
        &["--load", "d=dogmatism.csv"],
        &lines,
        &[("COLLOQUY_SVG_DIR", svg.to_str().unwrap())],
    );
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("certainty"), "{text}");
    assert!(text.contains(" | #"), "{text}");
    let file = svg.join("chart-1.svg");
    assert!(text.contains(&format!("chart saved to {}", file.display())), "{text}");
    let body = std::fs::read_to_string(file).unwrap();
    assert_eq!(body.matches("<rect").count(), 5);
}

#[test]
fn serve_answers_health() {
    use std::io::{BufRead, BufReader, Read};
    let mut child = Command::new(env!("CARGO_BIN_EXE_colloquy"))
        .arg("--serve")
        .env("COLLOQUY_DATA_DIR", core_tests("data"))
        .env("COLLOQUY_LISTEN", "127.0.0.1:0")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(child.stderr.take().unwrap())
        .read_line(&mut banner)
        .unwrap();
    let addr = banner
        .trim()
        .strip_prefix("serving on http://")
        .unwrap_or_else(|| panic!("{banner}"))
        .to_string();
    let mut conn = std::net::TcpStream::connect(&addr).unwrap();
    write!(
        conn,
        "GET /health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut reply = String::new();
    conn.read_to_string(&mut reply).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"status\":\"ok\""), "{reply}");
}
