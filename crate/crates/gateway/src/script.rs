//! Command scripts: one CLI command per line, `#` comments, `$name`
//! variables bound by `submit --as name` (`$job` is always the latest id),
//! and `expect-error CODE <command>` for steps that must fail.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Parser;
use worldgrid::grid::Grid;

use crate::api::{ApiRequest, Reply};
use crate::client::{Backend, Local};
use crate::commands::Command;
use crate::error::ApiError;

#[derive(Debug, Parser)]
#[command(name = "worldgrid", no_binary_name = true, disable_help_subcommand = true)]
struct Line {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptOutcome {
    pub transcript: String,
    /// First unexpected failure, with its 1-based line number.
    pub failed: Option<(usize, ApiError)>,
}

fn script_error(msg: impl Into<String>) -> ApiError {
    ApiError::new("ScriptError", msg)
}

/// Parses one command line into a [`Command`].
pub fn parse_command(words: &[String]) -> Result<Command, ApiError> {
    Line::try_parse_from(words).map(|l| l.cmd).map_err(|e| script_error(e.render().to_string().trim().to_string()))
}

fn substitute(words: Vec<String>, vars: &BTreeMap<String, String>) -> Result<Vec<String>, ApiError> {
    words
        .into_iter()
        .map(|w| match w.strip_prefix('$') {
            Some(name) => vars.get(name).cloned().ok_or_else(|| script_error(format!("unbound variable ${name}"))),
            None => Ok(w),
        })
        .collect()
}

fn step(backend: &mut dyn Backend, words: Vec<String>, base: &Path, vars: &mut BTreeMap<String, String>) -> Result<Reply, ApiError> {
    let prepared = parse_command(&words)?.prepare(base)?;
    let is_submit = matches!(prepared.req, ApiRequest::Submit { .. });
    let reply = backend.call(prepared.req)?;
    if is_submit {
        let id = reply.value().and_then(|v| v["id"].as_str().map(str::to_string)).ok_or_else(|| script_error("submit reply has no id"))?;
        if let Some(name) = prepared.bind {
            vars.insert(name, id.clone());
        }
        vars.insert("job".into(), id);
    }
    if let Some(path) = prepared.save_to {
        std::fs::write(&path, &reply.body).map_err(|e| script_error(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(reply)
}

/// Runs `text` line by line, stopping at the first unexpected failure.
pub fn run_script(text: &str, base: &Path, backend: &mut dyn Backend) -> ScriptOutcome {
    let mut vars = BTreeMap::new();
    let mut out = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push_str(&format!("> {line}\n"));
        let words = match shell_words::split(line) {
            Ok(w) => w,
            Err(e) => return ScriptOutcome { transcript: out, failed: Some((i + 1, script_error(e.to_string()))) },
        };
        let (expect, words) = match words.split_first() {
            Some((first, rest)) if first == "expect-error" => match rest.split_first() {
                Some((code, cmd)) => (Some(code.clone()), cmd.to_vec()),
                None => return ScriptOutcome { transcript: out, failed: Some((i + 1, script_error("expect-error needs a code"))) },
            },
            _ => (None, words),
        };
        let result = substitute(words, &vars).and_then(|w| step(backend, w, base, &mut vars));
        match (result, expect) {
            (Ok(reply), None) => out.push_str(&reply.body),
            (Err(e), Some(code)) if e.code == code => out.push_str(&format!("! {} (expected)\n", e.code)),
            (Ok(_), Some(code)) => {
                let e = script_error(format!("expected {code}, but the command succeeded"));
                return ScriptOutcome { transcript: out, failed: Some((i + 1, e)) };
            }
            (Err(e), _) => {
                out.push_str(&format!("! {e}\n"));
                return ScriptOutcome { transcript: out, failed: Some((i + 1, e)) };
            }
        }
    }
    ScriptOutcome { transcript: out, failed: None }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: ScriptOutcome,
    pub lb_log: String,
    pub event_log: String,
}

/// A fresh simulation of `scenario` under `seed`, driven by the script at
/// `script`. Paths inside the script resolve against its directory.
pub fn run(scenario: &Path, seed: u64, script: &Path) -> Result<RunResult, ApiError> {
    let grid = Grid::load(scenario, seed)?;
    let text = std::fs::read_to_string(script).map_err(|e| script_error(format!("cannot read {}: {e}", script.display())))?;
    let base = script.parent().unwrap_or(Path::new("."));
    let mut local = Local::new(grid);
    let outcome = run_script(&text, base, &mut local);
    Ok(RunResult { outcome, lb_log: local.grid.lb_log(), event_log: local.grid.event_log() })
}
