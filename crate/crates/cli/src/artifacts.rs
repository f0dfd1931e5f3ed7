//! Input loading with digests, atomic output writes and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const BUNDLED: &str = "<bundled>";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub version: &'static str,
    pub created_at: String,
}

/// Collects inputs and outputs of one command; nothing touches the disk until
/// `commit`.
pub struct Run {
    command: String,
    inputs: Vec<InputDigest>,
    seeds: Vec<u64>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Run {
    pub fn new(command: &str) -> Self {
        Run {
            command: command.to_string(),
            inputs: Vec::new(),
            seeds: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads a text input, or the bundled fallback when no path is given.
    pub fn input(&mut self, role: &str, path: Option<&Path>, bundled: &str) -> Result<String> {
        let (label, text) = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read {role} `{}`", p.display()))?;
                (p.display().to_string(), text)
            }
            None => (BUNDLED.to_string(), bundled.to_string()),
        };
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: label,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        });
        Ok(text)
    }

    pub fn required_input(&mut self, role: &str, path: &Path) -> Result<String> {
        self.input(role, Some(path), "")
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn output(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.outputs.push((path.into(), bytes));
    }

    /// Writes every output atomically, then the manifest next to `anchor`.
    /// Already written files are removed if a later write fails.
    pub fn commit(self, anchor: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            arguments: std::env::args().skip(1).collect(),
            inputs: self.inputs,
            seeds: self.seeds,
            outputs: self.outputs.iter().map(|(p, _)| p.display().to_string()).collect(),
            version: env!("CARGO_PKG_VERSION"),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
        manifest_bytes.push(b'\n');
        let mut all = self.outputs;
        all.push((manifest_path(anchor), manifest_bytes));

        let mut written: Vec<PathBuf> = Vec::new();
        for (path, bytes) in &all {
            if let Err(e) = write_atomic(path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path.clone());
        }
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// `dir/trials.jsonl` with seed 7 becomes `dir/trials.seed7.jsonl`.
pub fn seeded_path(path: &Path, seed: u64) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    path.with_file_name(name)
}

pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into `{}`", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
