//! `projenergy`: batch experiments with machine-readable outputs.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 internal inconsistency.

/// `println!` that gives up quietly when stdout is closed, e.g. by `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use args::{Cli, Command};
use output::{parameters, timestamp, versions, RunManifest, Sink};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<projenergy::Error> for Failure {
    fn from(e: projenergy::Error) -> Self {
        use projenergy::Error as E;
        match e {
            E::InconsistentVerdicts(_) | E::Internal(_) => Self::internal(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

/// `--key value` tokens from a parameter file. A run manifest contributes
/// its `parameters` object.
fn param_tokens(path: &Path) -> Result<Vec<OsString>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(Failure::input("parameter file must hold a JSON object"));
    };
    if let Some(Value::Object(inner)) = map.remove("parameters") {
        map = inner;
    }
    let mut out = Vec::new();
    for (key, v) in map {
        if key == "params" {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag),
            Value::Number(n) => out.extend([flag, n.to_string().into()]),
            Value::String(s) => out.extend([flag, s.into()]),
            _ => return Err(Failure::input(format!("parameter {key}: expected a scalar"))),
        }
    }
    Ok(out)
}

fn parse() -> Result<Cli, Failure> {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit());
    let Some(path) = &cli.params else {
        return Ok(cli);
    };
    let mut full = argv.clone();
    full.extend(param_tokens(path)?);
    Ok(Cli::try_parse_from(full).unwrap_or_else(|e| e.exit()))
}

fn run() -> Result<bool, Failure> {
    let cli = parse()?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::internal(format!("thread pool: {e}")))?;
    }
    let started = timestamp();
    let mut sink = Sink::new(cli.output.clone())?;
    let command = cli.command.name();
    let (params, seed) = match &cli.command {
        Command::Energy(a) => (parameters(a), 0),
        Command::Optimize(a) => (parameters(a), a.ascent.seed),
        Command::ScanAlpha(a) => (parameters(a), a.ascent.seed),
        Command::Transport(a) => (parameters(a), 0),
        Command::Verify(v) => (parameters(&v.suite), v.suite.seed()),
    };
    let pass = match &cli.command {
        Command::Energy(a) => commands::energy(a, &mut sink)?,
        Command::Optimize(a) => commands::optimize(a, &mut sink)?,
        Command::ScanAlpha(a) => commands::scan_alpha(a, &mut sink)?,
        Command::Transport(a) => commands::transport(a, &mut sink)?,
        Command::Verify(v) => commands::verify(&v.suite, &mut sink)?,
    };
    sink.finish(RunManifest {
        command,
        parameters: params,
        seed,
        versions: versions(),
        started,
        finished: String::new(),
        outputs: Vec::new(),
    })?;
    Ok(pass)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
