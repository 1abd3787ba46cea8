//! Front ends for the colloquy engine: a terminal REPL, transcript replay,
//! the registry self-test and the chat service.

pub mod chart;
pub mod repl;
pub mod server;

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;

use colloquy_core::replay::{replay, Transcript};
use colloquy_core::service::Service;
use colloquy_core::session::Session;
use colloquy_core::{AppConfig, Engine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_STARTUP: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "colloquy",
    version,
    about = "Talk to your data; export the conversation as a script."
)]
pub struct Args {
    /// TOML settings file; COLLOQUY_* variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replay a transcript and report each turn.
    #[arg(long, value_name = "FILE")]
    pub replay: Option<PathBuf>,
    /// Write the session's script here when the REPL ends.
    #[arg(long, value_name = "FILE")]
    pub export: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Validate the command pack and exit.
    #[arg(long)]
    pub selftest: bool,
    /// Run the chat service instead of the REPL.
    #[arg(long)]
    pub serve: bool,
    /// Bind a CSV file before the first turn.
    #[arg(long, value_name = "NAME=PATH")]
    pub load: Vec<String>,
}

fn startup(msg: impl std::fmt::Display) -> i32 {
    eprintln!("colloquy: {msg}");
    EXIT_STARTUP
}

/// Runs one invocation and returns the process exit code.
pub fn run(args: Args, input: impl std::io::BufRead, out: &mut impl Write) -> i32 {
    let mut cfg = match AppConfig::resolve(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return startup(e),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let engine = match Engine::with_pack(cfg.engine.clone()) {
        Ok(e) => Arc::new(e),
        Err(e) => return startup(e),
    };
    for w in engine.warnings() {
        log::warn!("{w:?}");
    }

    if args.selftest {
        let report = engine.selftest();
        let _ = writeln!(out, "{} commands, {} examples", report.commands, report.examples);
        for p in &report.problems {
            let _ = writeln!(out, "  {p}");
        }
        let _ = writeln!(out, "selftest {}", if report.passed() { "passed" } else { "failed" });
        return if report.passed() { EXIT_OK } else { EXIT_FAILED };
    }

    if let Some(path) = &args.replay {
        let transcript = match Transcript::load(path) {
            Ok(t) => t,
            Err(e) => return startup(format!("{}: {e}", path.display())),
        };
        let report = replay(engine, &transcript, cfg.seed);
        let _ = writeln!(out, "{report}");
        return if report.passed() { EXIT_OK } else { EXIT_FAILED };
    }

    if args.serve {
        let svc = Arc::new(Service::new(
            engine,
            cfg.seed,
            Duration::from_secs(cfg.idle_timeout_secs),
        ));
        let rt = match tokio::runtime::Runtime::new() {
            Ok(rt) => rt,
            Err(e) => return startup(e),
        };
        return match rt.block_on(server::serve(
            svc,
            &cfg.listen,
            Duration::from_secs(cfg.idle_timeout_secs),
        )) {
            Ok(()) => EXIT_OK,
            Err(e) => startup(e),
        };
    }

    let mut session = Session::new(engine, cfg.seed);
    for spec in &args.load {
        let Some((name, path)) = spec.split_once('=') else {
            return startup(format!("--load expects NAME=PATH, got '{spec}'"));
        };
        if let Err(e) = session.preload(name.trim(), path.trim()) {
            return startup(format!("could not load {path}: {e}"));
        }
    }
    if let Some(dir) = &cfg.svg_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return startup(format!("{}: {e}", dir.display()));
        }
    }
    let mut repl = repl::Repl::new(session, cfg.svg_dir.as_deref());
    if let Err(e) = repl.run(input, out) {
        eprintln!("colloquy: {e}");
        return EXIT_FAILED;
    }
    if let Some(path) = &args.export {
        if let Err(e) = repl.export_to(path) {
            eprintln!("colloquy: could not write {}: {e}", path.display());
            return EXIT_FAILED;
        }
    }
    EXIT_OK
}
