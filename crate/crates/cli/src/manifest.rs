use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Provenance record written next to the outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub version: String,
    pub seeds: Vec<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputDigest>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects the files of one command run and seals them with a manifest.
pub struct Run {
    dir: PathBuf,
    command: String,
    parameters: serde_json::Value,
    seeds: Vec<u64>,
    started_at: String,
    outputs: Vec<OutputDigest>,
}

impl Run {
    pub fn start(dir: &Path, command: &str, parameters: &impl Serialize) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            parameters: serde_json::to_value(parameters)?,
            seeds: Vec::new(),
            started_at: now(),
            outputs: Vec::new(),
        })
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.outputs.push(OutputDigest {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            parameters: self.parameters,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: self.seeds,
            started_at: self.started_at,
            finished_at: now(),
            outputs: self.outputs,
        };
        let path = self.dir.join(format!("{}.manifest.json", manifest.command));
        fs::write(path, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }
}
