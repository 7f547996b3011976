mod args;
mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;
use manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] phasect::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// `key=value` lines become flags placed ahead of the user's own, so that
/// later (explicit) occurrences win.
fn config_flags(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), k + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        match value.trim() {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Resolve `--replay` and `--config` into a plain argument vector.
fn expand(raw: Vec<String>) -> CliResult<Vec<String>> {
    if raw.get(1).map(String::as_str) == Some("--replay") {
        let path = raw
            .get(2)
            .ok_or_else(|| CliError::Usage("--replay needs a manifest path".into()))?;
        let m: RunManifest = phasect::io::read_json(Path::new(path))
            .map_err(|e| CliError::Usage(format!("cannot read manifest {path}: {e}")))?;
        return Ok(m.argv);
    }
    if raw.len() < 2 || raw[1].starts_with('-') {
        return Ok(raw);
    }
    let mut rest = Vec::new();
    let mut config = Vec::new();
    let mut it = raw[2..].iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
            config.extend(config_flags(Path::new(p))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config.extend(config_flags(Path::new(p))?);
        } else {
            rest.push(a.clone());
        }
    }
    let mut argv = raw[..2].to_vec();
    argv.extend(config);
    argv.extend(rest);
    Ok(argv)
}

fn parse(argv: &[String]) -> std::result::Result<Cli, clap::Error> {
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.try_get_matches_from(argv.iter().map(OsString::from))?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match expand(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    match commands::run(&cli.command) {
        Ok(outcome) => {
            if let Some(path) = outcome.manifest {
                let manifest = RunManifest::new(&cli.command, &argv, outcome.outputs, start.elapsed().as_secs_f64());
                if let Err(e) = manifest.write(&path) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
