//! Keypoint JSON files.
//!
//! ```json
//! {"version": 1, "samples": [{"id": "s1", "label": "hello",
//!   "frames": [{"left": [[x, y, z], ...21], "right": null}, ...]}]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_sample_with, DeepSnippets, FrameRecord, SampleRecord, SignSample, DEFAULT_SNIPPET_LEN};

pub const KEYPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFile {
    pub version: u32,
    pub samples: Vec<SampleRecord>,
}

/// What to do with videos shorter than one snippet when the deep channel is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShortVideoPolicy {
    /// Reject the sample.
    #[default]
    Strict,
    /// Repeat the last frame up to one snippet length.
    Lenient,
}

impl std::str::FromStr for ShortVideoPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(ShortVideoPolicy::Strict),
            "lenient" => Ok(ShortVideoPolicy::Lenient),
            other => Err(Error::invalid(format!("unknown short-video policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Load snippet features and enforce the minimum video length.
    pub deep_channel: bool,
    pub snippet_len: usize,
    pub short_videos: ShortVideoPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            deep_channel: false,
            snippet_len: DEFAULT_SNIPPET_LEN,
            short_videos: ShortVideoPolicy::Strict,
        }
    }
}

pub(crate) fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: KeypointFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if file.version != KEYPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported version {}", file.version)));
    }
    Ok(file.samples)
}

/// Validates a record and converts it, attaching `snippets` when given.
pub(crate) fn build_sample(
    mut rec: SampleRecord,
    snippets: Option<Vec<Vec<f32>>>,
    opts: &LoadOptions,
    path: &Path,
) -> Result<SignSample> {
    if let Some(v) = validate_sample_with(&rec, opts.snippet_len).first() {
        return Err(Error::format(path, format!("sample {}: {v}", rec.id)));
    }
    if opts.deep_channel && rec.frames.len() < opts.snippet_len {
        match opts.short_videos {
            ShortVideoPolicy::Strict => {
                return Err(Error::format(
                    path,
                    format!(
                        "sample {}: {} frames, shorter than one snippet ({})",
                        rec.id,
                        rec.frames.len(),
                        opts.snippet_len
                    ),
                ))
            }
            ShortVideoPolicy::Lenient => {
                let last: FrameRecord = rec.frames.last().cloned().expect("validated non-empty");
                rec.frames.resize(opts.snippet_len, last);
            }
        }
    }
    let id = rec.id.clone();
    let mut sample = SignSample::try_from(SampleRecord {
        deep_snippets: None,
        ..rec
    })
    .map_err(|e| Error::format(path, e.to_string()))?;
    if let Some(s) = snippets {
        let deep = DeepSnippets::new(s).map_err(|e| Error::format(path, format!("sample {id}: {e}")))?;
        let frames = sample.frames().to_vec();
        sample = SignSample::with_snippet_len(id, sample.label().to_string(), frames, Some(deep), opts.snippet_len)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    Ok(sample)
}

/// Loads and validates every sample of a keypoint file (without snippets).
pub fn load_keypoints(path: &Path, opts: &LoadOptions) -> Result<Vec<SignSample>> {
    read_records(path)?
        .into_iter()
        .map(|r| build_sample(r, None, opts, path))
        .collect()
}

pub fn save_keypoints(path: &Path, samples: &[SignSample]) -> Result<()> {
    let file = KeypointFile {
        version: KEYPOINT_VERSION,
        samples: samples.iter().map(SampleRecord::from).collect(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrameSkeleton, HandFrame};

    fn hand(seed: f64) -> HandFrame {
        let c: Vec<[f64; 3]> = (0..21)
            .map(|j| [seed * j as f64 + 0.1, (j as f64).sqrt() / 3.0, -seed])
            .collect();
        HandFrame::from_coords(&c).unwrap()
    }

    fn sample(frames: usize) -> SignSample {
        let f = (0..frames)
            .map(|t| FrameSkeleton::new(Some(hand(t as f64 / 7.0)), None).unwrap())
            .collect();
        SignSample::new("s1", "hello", f, None).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        let s = sample(5);
        save_keypoints(&p, std::slice::from_ref(&s)).unwrap();
        assert_eq!(load_keypoints(&p, &LoadOptions::default()).unwrap(), vec![s]);
    }

    #[test]
    fn bad_joint_count_names_sample_and_frame() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        let mut rec = SampleRecord::from(&sample(3));
        rec.frames[2].left.as_mut().unwrap().pop();
        let file = KeypointFile {
            version: 1,
            samples: vec![rec],
        };
        std::fs::write(&p, serde_json::to_string(&file).unwrap()).unwrap();
        let err = load_keypoints(&p, &LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains("s1") && err.contains("frame 2"), "{err}");
    }

    #[test]
    fn short_video_policies() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        save_keypoints(&p, &[sample(4)]).unwrap();
        let strict = LoadOptions {
            deep_channel: true,
            ..LoadOptions::default()
        };
        assert!(load_keypoints(&p, &strict).is_err());
        let lenient = LoadOptions {
            short_videos: ShortVideoPolicy::Lenient,
            ..strict
        };
        let s = load_keypoints(&p, &lenient).unwrap();
        assert_eq!(s[0].frames().len(), 16);
        assert_eq!(s[0].frames()[15], s[0].frames()[3]);
        assert_eq!(load_keypoints(&p, &LoadOptions::default()).unwrap()[0].frames().len(), 4);
    }
}
