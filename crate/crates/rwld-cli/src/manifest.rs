//! Run manifests: every compute subcommand writes, next to its output,
//! a JSON record of the resolved configuration, seeds, input hashes,
//! timestamps, and output files. Re-running with `--config manifest.json`
//! replays the run bitwise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{CliError, ConfigDoc};

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub resolved_config: ConfigDoc,
    pub seed: u64,
    /// sha256 of every file the run read, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot hash {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Collects the run record as the command progresses; `write` finalizes
/// the timestamps and drops the JSON next to the main output.
pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, resolved_config: ConfigDoc, seed: u64) -> Self {
        ManifestBuilder {
            manifest: RunManifest {
                tool: "rwld".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                resolved_config,
                seed,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
                started_unix: now_unix(),
                finished_unix: 0.0,
                error: None,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let hash = sha256_file(path)?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn error(&mut self, message: &str) {
        self.manifest.error = Some(message.to_string());
    }

    /// Write `<stem>.manifest.json` next to `out` and return its path.
    pub fn write(mut self, out: &Path) -> Result<PathBuf, CliError> {
        self.manifest.finished_unix = now_unix();
        let path = sibling(out, "manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::Config(format!("manifest encode: {e}")))?;
        std::fs::write(&path, json)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// `/dir/name.ext` -> `/dir/name.suffix`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}
