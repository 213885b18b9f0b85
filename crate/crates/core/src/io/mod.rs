//! On-disk formats: keypoint JSON, embedding TSV, `ZSDF` snippet files,
//! dataset manifests and the synthetic dataset generator.

mod deep;
mod embeddings;
mod keypoints;
mod manifest;
pub mod synth;

pub use deep::{load_deep_features, read_deep_features, write_deep_features, DEEP_MAGIC, DEEP_VERSION};
pub use embeddings::{load_embeddings, save_embeddings};
pub use keypoints::{load_keypoints, save_keypoints, KeypointFile, LoadOptions, ShortVideoPolicy};
pub use manifest::{load_dataset, read_manifest, save_dataset, Dataset, DatasetManifest, ManifestEntry};
