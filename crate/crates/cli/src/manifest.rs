use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

/// Written next to every file output so a run can be repeated.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub wall_time_seconds: f64,
}

pub struct Recorder {
    command: String,
    parameters: serde_json::Value,
    seed: Option<u64>,
    started: Instant,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn new(command: &str, parameters: impl Serialize, seed: Option<u64>) -> Self {
        Recorder {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            seed,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: Option<&Path>) {
        self.inputs.push(p.map_or_else(|| "-".to_string(), |p| p.display().to_string()));
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    /// Writes `path` (or `<first output>.manifest.json`); nothing when every
    /// output went to stdout.
    pub fn finish(self, path: Option<PathBuf>) -> anyhow::Result<()> {
        let Some(path) = path.or_else(|| self.outputs.first().map(|o| PathBuf::from(format!("{o}.manifest.json"))))
        else {
            return Ok(());
        };
        let m = RunManifest {
            command: self.command,
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        std::fs::write(path, tvbar_core::io::to_json_pretty(&m)?)?;
        Ok(())
    }
}
