//! Run manifests: resolved settings plus digests of every file read and written.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Tracks one command run: reads inputs, writes outputs, then the manifest.
pub struct Run {
    command: &'static str,
    out_dir: PathBuf,
    started_at: String,
    inputs: BTreeMap<String, FileDigest>,
    outputs: BTreeMap<String, FileDigest>,
    notes: Vec<String>,
}

impl Run {
    pub fn start(command: &'static str, out_dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| {
            CliError::usage(format!("cannot create output dir {}: {e}", out_dir.display()))
        })?;
        Ok(Self {
            command,
            out_dir: out_dir.to_path_buf(),
            started_at: now(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: Vec::new(),
        })
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Reads an input file whole and records its digest. A digest that differs
    /// from the one in a replayed manifest is reported but not fatal.
    pub fn read_input(&mut self, key: &str, path: &Path, config: &Config) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::usage(format!("cannot read {key} file {}: {e}", path.display())))?;
        let sha256 = sha256_hex(&bytes);
        if let Some(expected) = config.expected_digest(key) {
            if expected != sha256 {
                self.note(format!(
                    "warning: {key} input {} differs from the manifest digest",
                    path.display()
                ));
            }
        }
        self.inputs.insert(
            key.to_string(),
            FileDigest {
                path: path.display().to_string(),
                sha256,
            },
        );
        Ok(bytes)
    }

    /// Writes `name` under the output directory from a fully rendered buffer.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.out_path(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.insert(
            name.to_string(),
            FileDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(bytes),
            },
        );
        Ok(())
    }

    /// Prints a diagnostic to stderr and keeps it in the manifest.
    pub fn note(&mut self, message: impl Into<String>) {
        let message = message.into();
        eprintln!("{message}");
        self.notes.push(message);
    }

    pub fn finish(self, config: BTreeMap<String, String>) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            finished_at: now(),
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            notes: self.notes,
        };
        let path = self.out_dir.join(format!("{}.manifest.json", self.command));
        let mut text = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::usage(format!("cannot encode manifest: {e}")))?;
        text.write_all(b"\n").expect("write to Vec");
        fs::write(&path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
