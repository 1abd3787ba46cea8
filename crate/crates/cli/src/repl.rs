//! Line-oriented loop over one session.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use colloquy_core::session::{AgentResponse, Session};
use colloquy_core::value::Value;

use crate::chart;

pub const PROMPT: &str = "> ";
const QUIT: [&str; 3] = ["quit", "exit", ":q"];

pub struct Repl<'a> {
    pub session: Session,
    pub svg_dir: Option<&'a Path>,
    charts: usize,
}

impl<'a> Repl<'a> {
    pub fn new(session: Session, svg_dir: Option<&'a Path>) -> Self {
        Repl {
            session,
            svg_dir,
            charts: 0,
        }
    }

    /// Reads lines until end of input or a quit word.
    pub fn run(&mut self, input: impl BufRead, out: &mut impl Write) -> io::Result<()> {
        write!(out, "{PROMPT}")?;
        out.flush()?;
        for line in input.lines() {
            let line = line?;
            let text = line.trim();
            if QUIT.contains(&text) {
                break;
            }
            if !text.is_empty() {
                self.turn(text, out)?;
            }
            write!(out, "{PROMPT}")?;
            out.flush()?;
        }
        writeln!(out)
    }

    /// The hint for a fresh request, then the responses.
    pub fn turn(&mut self, text: &str, out: &mut impl Write) -> io::Result<()> {
        if !self.session.in_progress() {
            if let Some(h) = self.session.hints(text).ranked.first() {
                writeln!(out, "  hint: {}", h.hint_text)?;
            }
        }
        let responses = self.session.handle_input(text);
        for r in &responses {
            self.show(r, out)?;
        }
        Ok(())
    }

    fn show(&mut self, r: &AgentResponse, out: &mut impl Write) -> io::Result<()> {
        match r {
            AgentResponse::Say { text } | AgentResponse::ShowHelp { text } => writeln!(out, "{text}"),
            AgentResponse::Error { text } => writeln!(out, "! {text}"),
            AgentResponse::Ask { prompt, options, .. } => {
                writeln!(out, "{prompt}")?;
                if !options.is_empty() {
                    let opts: Vec<String> = options.iter().map(|o| format!("[{o}]")).collect();
                    writeln!(out, "  {}", opts.join(" "))?;
                }
                Ok(())
            }
            AgentResponse::ShowValue { value, explanation } => {
                writeln!(out, "{explanation}")?;
                match value {
                    Value::Plot(spec) => {
                        writeln!(out, "{}", chart::text_chart(spec, chart::TEXT_WIDTH))?;
                        if let Some(dir) = self.svg_dir {
                            self.charts += 1;
                            let path = dir.join(format!("chart-{}.svg", self.charts));
                            match std::fs::write(&path, chart::svg_chart(spec)) {
                                Ok(()) => writeln!(out, "  chart saved to {}", path.display())?,
                                Err(e) => writeln!(out, "! could not write {}: {e}", path.display())?,
                            }
                        }
                        Ok(())
                    }
                    Value::Collection(c) => writeln!(out, "{}", c.preview(5)),
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn export_to(&self, path: &PathBuf) -> io::Result<()> {
        let script = self
            .session
            .export_script()
            .map_err(|e| io::Error::other(e.to_string()))?;
        std::fs::write(path, script)
    }
}
