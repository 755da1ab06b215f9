//! Output directory with a checksum manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};

pub const MANIFEST: &str = "manifest.json";
pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    core_version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    config_sha256: String,
    config: BTreeMap<String, String>,
    inputs: &'a BTreeMap<String, String>,
    stages: &'a [StageRecord],
    outputs: &'a BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Collects files under one directory and records their digests.
pub struct Bundle {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    stages: Vec<StageRecord>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        // a stale marker would outlive a successful rerun
        let marker = dir.join(FAILURE_MARKER);
        if marker.exists() {
            fs::remove_file(&marker)?;
        }
        Ok(Bundle {
            dir: dir.to_path_buf(),
            outputs: BTreeMap::new(),
            inputs: BTreeMap::new(),
            stages: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Runs `f` against an in-memory buffer and stores the result.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> tenure_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("rendering {name}"))?;
        self.write(name, &buf)
    }

    pub fn record_inputs(&mut self, cfg: &RunConfig) -> Result<()> {
        for (key, path) in cfg.inputs() {
            self.inputs.insert(key.to_string(), sha256_file(path)?);
        }
        Ok(())
    }

    pub fn stage(&mut self, stage: &str, status: StageStatus, detail: Option<String>) {
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            status,
            detail,
        });
    }

    pub fn failed(&self) -> bool {
        self.stages.iter().any(|s| s.status == StageStatus::Failed)
    }

    /// Writes the manifest, plus the failure marker if any stage failed.
    pub fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<bool> {
        let failed = self.failed();
        if failed {
            let text: String = self
                .stages
                .iter()
                .filter(|s| s.status == StageStatus::Failed)
                .map(|s| format!("{}: {}\n", s.stage, s.detail.as_deref().unwrap_or("failed")))
                .collect();
            fs::write(self.dir.join(FAILURE_MARKER), text)?;
        }
        let outputs = std::mem::take(&mut self.outputs);
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            core_version: tenure_core::VERSION,
            command,
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            config: cfg.canonical(),
            inputs: &self.inputs,
            stages: &self.stages,
            outputs: &outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST), bytes)?;
        Ok(!failed)
    }
}
