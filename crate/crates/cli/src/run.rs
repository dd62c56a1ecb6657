use std::path::Path;
use std::time::Instant;

use quilt_core::io::write_json;
use serde::Serialize;
use serde_json::Value;

use crate::exit::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub quilt: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// `run.json`: what was run, with which resolved settings, and how long it took.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_echo: Value,
    pub seed: u64,
    pub versions: Versions,
    pub timings: Timings,
    pub warnings: Vec<String>,
}

pub struct RunRecorder {
    command: &'static str,
    seed: u64,
    start: Instant,
}

impl RunRecorder {
    pub fn start(command: &'static str, seed: u64) -> Self {
        RunRecorder { command, seed, start: Instant::now() }
    }

    pub fn finish(self, out: &Path, config_echo: Value, warnings: Vec<String>) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config_echo,
            seed: self.seed,
            versions: Versions { quilt: env!("CARGO_PKG_VERSION") },
            timings: Timings { total_seconds: self.start.elapsed().as_secs_f64() },
            warnings,
        };
        Ok(write_json(&out.join("run.json"), &manifest)?)
    }
}
