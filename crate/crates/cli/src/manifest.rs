use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::Command;

/// Record of one invocation, written next to its outputs. `argv` is the
/// fully expanded command line, so `phasect --replay` needs nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub params: serde_json::Value,
    pub argv: Vec<String>,
    pub master_seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &Command, argv: &[String], outputs: Vec<PathBuf>, wall_time_s: f64) -> Self {
        let params = serde_json::to_value(command).unwrap_or(serde_json::Value::Null);
        let master_seed = match command {
            Command::Matrix(a) => Some(a.seed),
            Command::Phantom(a) => Some(a.seed),
            Command::Diagram(a) => Some(a.seed),
            Command::RecoveryCurve(a) => Some(a.seed),
            _ => None,
        };
        Self {
            command: command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params,
            argv: argv.to_vec(),
            master_seed,
            outputs,
            wall_time_s,
        }
    }

    pub fn write(&self, path: &Path) -> phasect::Result<()> {
        phasect::io::write_json(path, self)
    }
}
