//! Provenance record written next to every command's outputs.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use zssl_core::io::read_manifest;

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    /// Hex SHA-256 of `blob <len>\0<bytes>`, the git object hash of the file.
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn git_blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects input hashes and timing while a command runs.
pub struct Recorder {
    started: DateTime<Utc>,
    inputs: Vec<InputHash>,
}

impl Recorder {
    pub fn start() -> Self {
        Recorder {
            started: Utc::now(),
            inputs: Vec::new(),
        }
    }

    pub fn hash_file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("{}: cannot read", path.display()))?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: git_blob_sha256(&bytes),
        });
        Ok(())
    }

    /// Hashes a dataset manifest and every file it references. Snippet files
    /// are included only when `deep` is set.
    pub fn hash_dataset(&mut self, manifest: &Path, deep: bool) -> Result<()> {
        self.hash_file(manifest)?;
        let m = read_manifest(manifest)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut files: Vec<PathBuf> = vec![base.join(&m.embeddings)];
        for e in &m.samples {
            let p = base.join(&e.keypoints);
            if !files.contains(&p) {
                files.push(p);
            }
        }
        if deep {
            if let Some(dir) = &m.deep_features {
                files.extend(m.samples.iter().map(|e| base.join(dir).join(format!("{}.zsdf", e.id))));
            }
        }
        for f in files {
            self.hash_file(&f)?;
        }
        Ok(())
    }

    pub fn finish(
        self,
        config: serde_json::Value,
        seeds: Vec<u64>,
        outputs: &[&Path],
        dest: &Path,
    ) -> Result<()> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: std::env::args().collect(),
            config,
            seeds,
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            started_at: timestamp(self.started),
            finished_at: timestamp(Utc::now()),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dest, json + "\n").with_context(|| format!("{}: cannot write", dest.display()))?;
        log::info!("run manifest written to {}", dest.display());
        Ok(())
    }
}

/// `<path>.run.json` next to a file output.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}
