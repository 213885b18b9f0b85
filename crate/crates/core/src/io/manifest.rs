//! Dataset manifests.
//!
//! ```json
//! {"version": 1, "name": "synth", "embeddings": "embeddings.tsv",
//!  "deep_features": "deep",
//!  "samples": [{"id": "s0000", "label": "class_00", "keypoints": "keypoints.json"}]}
//! ```
//!
//! Paths are relative to the manifest's directory. Snippet files live at
//! `<deep_features>/<id>.zsdf`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::deep::{load_deep_features, write_deep_features};
use super::embeddings::{load_embeddings, save_embeddings};
use super::keypoints::{build_sample, read_records, save_keypoints, LoadOptions};
use crate::error::{Error, Result};
use crate::model::{EmbeddingSet, SignSample};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: String,
    pub keypoints: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub name: String,
    pub embeddings: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_features: Option<String>,
    pub samples: Vec<ManifestEntry>,
}

/// Samples with the class embeddings they are scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<SignSample>,
    pub embeddings: EmbeddingSet,
}

impl Dataset {
    /// Distinct sample labels, in embedding-file order.
    pub fn class_labels(&self) -> Vec<String> {
        let present: std::collections::HashSet<&str> = self.samples.iter().map(|s| s.label()).collect();
        self.embeddings
            .labels()
            .filter(|l| present.contains(l))
            .map(str::to_string)
            .collect()
    }

    /// Snippet dimension, when every sample carries snippets.
    pub fn deep_dim(&self) -> Option<usize> {
        let dims: Vec<usize> = self.samples.iter().filter_map(|s| s.deep().map(|d| d.dim())).collect();
        (dims.len() == self.samples.len()).then(|| dims.first().copied()).flatten()
    }
}

fn existing(base: &Path, rel: &str) -> Result<PathBuf> {
    let p = base.join(rel);
    if !p.exists() {
        return Err(Error::Io {
            path: p,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist"),
        });
    }
    Ok(p)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(path, format!("unsupported manifest version {}", m.version)));
    }
    Ok(m)
}

/// Loads every sample the manifest lists, in manifest order. Snippets are
/// read only when `opts.deep_channel` is set.
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let emb_path = existing(base, &manifest.embeddings)?;
    let embeddings = load_embeddings(&emb_path)?;
    for e in &manifest.samples {
        if !embeddings.contains(&e.label) {
            return Err(Error::format(
                path,
                format!("sample {}: label {:?} not in {}", e.id, e.label, emb_path.display()),
            ));
        }
    }
    let deep_dir = if opts.deep_channel {
        let rel = manifest.deep_features.as_deref().ok_or_else(|| {
            Error::format(path, "deep channel requested but the manifest has no deep_features directory")
        })?;
        Some(existing(base, rel)?)
    } else {
        None
    };

    let mut files: BTreeMap<&str, HashMap<String, _>> = BTreeMap::new();
    for e in &manifest.samples {
        if !files.contains_key(e.keypoints.as_str()) {
            let kp = existing(base, &e.keypoints)?;
            let records = read_records(&kp)?
                .into_iter()
                .map(|r| (r.id.clone(), r))
                .collect();
            files.insert(&e.keypoints, records);
        }
    }

    let mut samples = Vec::with_capacity(manifest.samples.len());
    for e in &manifest.samples {
        let kp = base.join(&e.keypoints);
        let rec = files
            .get_mut(e.keypoints.as_str())
            .and_then(|m| m.remove(&e.id))
            .ok_or_else(|| Error::format(&kp, format!("no sample with id {:?}", e.id)))?;
        if rec.label != e.label {
            return Err(Error::format(
                &kp,
                format!("sample {}: label {:?} differs from manifest {:?}", e.id, rec.label, e.label),
            ));
        }
        let snippets = deep_dir
            .as_deref()
            .map(|d| load_deep_features(d, &e.id))
            .transpose()?;
        samples.push(build_sample(rec, snippets, opts, &kp)?);
    }
    Ok(Dataset {
        name: manifest.name,
        samples,
        embeddings,
    })
}

/// Writes `dataset` under `dir` (keypoints.json, embeddings.tsv,
/// deep/<id>.zsdf when every sample has snippets, manifest.json) and returns
/// the manifest path.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_keypoints(&dir.join("keypoints.json"), &dataset.samples)?;
    save_embeddings(&dir.join("embeddings.tsv"), &dataset.embeddings)?;
    let with_deep = dataset.deep_dim().is_some();
    if with_deep {
        let deep = dir.join("deep");
        std::fs::create_dir_all(&deep).map_err(|e| Error::io(&deep, e))?;
        for s in &dataset.samples {
            let snips = s.deep().expect("checked above");
            write_deep_features(&deep.join(format!("{}.zsdf", s.id())), snips.vectors())?;
        }
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        name: dataset.name.clone(),
        embeddings: "embeddings.tsv".into(),
        deep_features: with_deep.then(|| "deep".into()),
        samples: dataset
            .samples
            .iter()
            .map(|s| ManifestEntry {
                id: s.id().to_string(),
                label: s.label().to_string(),
                keypoints: "keypoints.json".into(),
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
