use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// One per command invocation, written as `manifest.json` in the output
/// directory. Everything except `timings` is a deterministic function of
/// the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub results: serde_json::Value,
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
            timings: BTreeMap::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn hash_file(path: &Path) -> anyhow::Result<FileHash> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
