//! Domain types shared across the pipeline.
//!
//! Validated types (`HandFrame`, `SignSample`, `SplitSpec`, ...) can only be
//! built through checked constructors. Unchecked data coming from files lives
//! in the `*Record` types and goes through [`validate_sample`] first.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINTS_PER_HAND: usize = 21;
pub const FINGERS: usize = 5;
/// Frames covered by one pixel-level snippet vector.
pub const DEFAULT_SNIPPET_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn sub(&self, other: &Point3) -> Point3 {
        Point3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn add(&self, other: &Point3) -> Point3 {
        Point3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn scale(&self, c: f64) -> Point3 {
        Point3::new(self.x * c, self.y * c, self.z * c)
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.sub(other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

/// The 21 keypoints of one hand.
///
/// Joints are addressed 1-based: joint 1 is the wrist, finger `f` in `1..=5`
/// owns joints `4f-2 ..= 4f+1` from base to tip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandFrame {
    joints: [Point3; JOINTS_PER_HAND],
}

impl HandFrame {
    pub fn new(joints: &[Point3]) -> Result<Self> {
        if joints.len() != JOINTS_PER_HAND {
            return Err(Error::invalid(format!(
                "joint count {} != {JOINTS_PER_HAND}",
                joints.len()
            )));
        }
        if let Some(i) = joints.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("joint {} is not finite", i + 1)));
        }
        let mut arr = [Point3::ORIGIN; JOINTS_PER_HAND];
        arr.copy_from_slice(joints);
        Ok(HandFrame { joints: arr })
    }

    pub fn from_coords(coords: &[[f64; 3]]) -> Result<Self> {
        let pts: Vec<Point3> = coords.iter().copied().map(Point3::from).collect();
        Self::new(&pts)
    }

    /// Joint by 1-based index. Panics outside `1..=21`.
    pub fn joint(&self, index: usize) -> &Point3 {
        assert!(
            (1..=JOINTS_PER_HAND).contains(&index),
            "joint index {index} out of 1..=21"
        );
        &self.joints[index - 1]
    }

    pub fn joints(&self) -> &[Point3; JOINTS_PER_HAND] {
        &self.joints
    }

    /// Applies `f` to every joint; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(&Point3) -> Point3) -> Result<Self> {
        let pts: Vec<Point3> = self.joints.iter().map(f).collect();
        Self::new(&pts)
    }

    pub fn to_coords(&self) -> Vec<[f64; 3]> {
        self.joints.iter().map(|p| p.to_array()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSkeleton {
    left: Option<HandFrame>,
    right: Option<HandFrame>,
}

impl FrameSkeleton {
    pub fn new(left: Option<HandFrame>, right: Option<HandFrame>) -> Result<Self> {
        if left.is_none() && right.is_none() {
            return Err(Error::invalid("no hand present"));
        }
        Ok(FrameSkeleton { left, right })
    }

    pub fn both(left: HandFrame, right: HandFrame) -> Self {
        FrameSkeleton {
            left: Some(left),
            right: Some(right),
        }
    }

    pub fn left(&self) -> Option<&HandFrame> {
        self.left.as_ref()
    }

    pub fn right(&self) -> Option<&HandFrame> {
        self.right.as_ref()
    }
}

/// Precomputed pixel-level snippet vectors for one sample.
///
/// Clones share a read counter so callers can verify which code paths
/// actually touched the deep channel.
#[derive(Debug, Clone)]
pub struct DeepSnippets {
    dim: usize,
    vectors: Arc<Vec<Vec<f32>>>,
    reads: Arc<AtomicUsize>,
}

impl DeepSnippets {
    pub fn new(vectors: Vec<Vec<f32>>) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::invalid("no snippets"));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::invalid(format!(
                    "snippet {i} has dimension {} (expected {dim})",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("snippet {i} is not finite")));
            }
        }
        Ok(DeepSnippets {
            dim,
            vectors: Arc::new(vectors),
            reads: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Snippet vectors; every call is counted.
    pub fn vectors(&self) -> &[Vec<f32>] {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.vectors
    }

    pub fn read_count(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }
}

impl PartialEq for DeepSnippets {
    fn eq(&self, other: &Self) -> bool {
        self.vectors == other.vectors
    }
}

/// A labeled keypoint sequence, optionally carrying snippet features.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSample {
    id: String,
    label: String,
    frames: Vec<FrameSkeleton>,
    deep: Option<DeepSnippets>,
}

impl SignSample {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        frames: Vec<FrameSkeleton>,
        deep: Option<DeepSnippets>,
    ) -> Result<Self> {
        Self::with_snippet_len(id, label, frames, deep, DEFAULT_SNIPPET_LEN)
    }

    pub fn with_snippet_len(
        id: impl Into<String>,
        label: impl Into<String>,
        frames: Vec<FrameSkeleton>,
        deep: Option<DeepSnippets>,
        snippet_len: usize,
    ) -> Result<Self> {
        let id = id.into();
        if frames.is_empty() {
            return Err(Error::invalid(format!("sample {id}: no frames")));
        }
        if let Some(d) = &deep {
            let expected = frames.len() / snippet_len.max(1);
            if d.len() != expected {
                return Err(Error::invalid(format!(
                    "sample {id}: {} snippets for {} frames (expected {expected})",
                    d.len(),
                    frames.len()
                )));
            }
        }
        Ok(SignSample {
            id,
            label: label.into(),
            frames,
            deep,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frames(&self) -> &[FrameSkeleton] {
        &self.frames
    }

    pub fn deep(&self) -> Option<&DeepSnippets> {
        self.deep.as_ref()
    }

    pub fn with_deep(mut self, deep: Option<DeepSnippets>) -> Result<Self> {
        let frames = std::mem::take(&mut self.frames);
        Self::new(self.id, self.label, frames, deep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEmbedding {
    pub label: String,
    pub vector: Vec<f64>,
}

/// Class embeddings in file order. Order defines class indices for
/// tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    entries: Vec<ClassEmbedding>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn new(entries: Vec<ClassEmbedding>) -> Result<Self> {
        let dim = entries
            .first()
            .map(|e| e.vector.len())
            .ok_or_else(|| Error::invalid("empty embedding set"))?;
        if dim == 0 {
            return Err(Error::invalid("embedding dimension is zero"));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.vector.len() != dim {
                return Err(Error::invalid(format!(
                    "embedding {:?} has dimension {} (expected {dim})",
                    e.label,
                    e.vector.len()
                )));
            }
            if e.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "embedding {:?} is not finite",
                    e.label
                )));
            }
            if e.vector.iter().all(|v| *v == 0.0) {
                return Err(Error::invalid(format!(
                    "zero-norm embedding {:?}",
                    e.label
                )));
            }
            if index.insert(e.label.clone(), i).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate embedding label {:?}",
                    e.label
                )));
            }
        }
        Ok(EmbeddingSet {
            dim,
            entries,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ClassEmbedding] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn get(&self, label: &str) -> Option<&ClassEmbedding> {
        self.index.get(label).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Subset in file order, keeping only labels accepted by `keep`.
    pub fn filter(&self, keep: impl Fn(&str) -> bool) -> Result<Self> {
        Self::new(
            self.entries
                .iter()
                .filter(|e| keep(&e.label))
                .cloned()
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// 80% seen / 20% unseen classes.
    P1,
    /// 50% seen / 50% unseen classes.
    P2,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::P1 => f.write_str("P1"),
            Protocol::P2 => f.write_str("P2"),
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(Protocol::P1),
            "p2" => Ok(Protocol::P2),
            other => Err(Error::invalid(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Disjoint seen/unseen class sets for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitSpec {
    seen: BTreeSet<String>,
    unseen: BTreeSet<String>,
    seed: u64,
    protocol: Protocol,
}

impl SplitSpec {
    pub fn new(
        seen: impl IntoIterator<Item = String>,
        unseen: impl IntoIterator<Item = String>,
        seed: u64,
        protocol: Protocol,
    ) -> Result<Self> {
        let seen: BTreeSet<String> = seen.into_iter().collect();
        let unseen: BTreeSet<String> = unseen.into_iter().collect();
        if seen.is_empty() || unseen.is_empty() {
            return Err(Error::invalid("split has an empty side"));
        }
        if let Some(l) = seen.intersection(&unseen).next() {
            return Err(Error::invalid(format!(
                "label {l:?} is both seen and unseen"
            )));
        }
        Ok(SplitSpec {
            seen,
            unseen,
            seed,
            protocol,
        })
    }

    pub fn seen(&self) -> &BTreeSet<String> {
        &self.seen
    }

    pub fn unseen(&self) -> &BTreeSet<String> {
        &self.unseen
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }
}

/// Declared layout of a feature vector; fixes its length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    SkelDist,
    SkelAng,
    SkelSvd,
    SkelAll,
    DeepLatent,
    Fused,
    Custom(usize),
}

impl Layout {
    pub const fn dim(self) -> usize {
        match self {
            Layout::SkelDist => 61,
            Layout::SkelAng => 20,
            Layout::SkelSvd => 35,
            Layout::SkelAll => 116,
            Layout::DeepLatent => 510,
            Layout::Fused => 1024,
            Layout::Custom(n) => n,
        }
    }

    pub fn name(self) -> String {
        match self {
            Layout::SkelDist => "SKEL_DIST".into(),
            Layout::SkelAng => "SKEL_ANG".into(),
            Layout::SkelSvd => "SKEL_SVD".into(),
            Layout::SkelAll => "SKEL_ALL".into(),
            Layout::DeepLatent => "DEEP_LATENT".into(),
            Layout::Fused => "FUSED".into(),
            Layout::Custom(n) => format!("CUSTOM({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    layout: Layout,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, layout: Layout) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::Shape {
                context: "feature layout",
                expected: layout.dim(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(FeatureVector { values, layout })
    }

    /// Picks the named layout when the length matches one of the fused
    /// layouts, `Custom` otherwise.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        let layout = match values.len() {
            1024 => Layout::Fused,
            n => Layout::Custom(n),
        };
        Self::new(values, layout)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unchecked hand/frame data as it appears in keypoint files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub left: Option<Vec<[f64; 3]>>,
    pub right: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub label: String,
    pub frames: Vec<FrameRecord>,
    #[serde(skip)]
    pub deep_snippets: Option<Vec<Vec<f32>>>,
}

impl From<&SignSample> for SampleRecord {
    fn from(s: &SignSample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            label: s.label.clone(),
            frames: s
                .frames
                .iter()
                .map(|f| FrameRecord {
                    left: f.left.map(|h| h.to_coords()),
                    right: f.right.map(|h| h.to_coords()),
                })
                .collect(),
            deep_snippets: s.deep.as_ref().map(|d| d.vectors.as_ref().clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Zero-based frame index, when the violation is frame-local.
    pub frame: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(i) => write!(f, "frame {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Lists every invariant violation in `sample`; empty means valid.
pub fn validate_sample(sample: &SampleRecord) -> Vec<Violation> {
    validate_sample_with(sample, DEFAULT_SNIPPET_LEN)
}

pub fn validate_sample_with(sample: &SampleRecord, snippet_len: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |frame: Option<usize>, message: String| out.push(Violation { frame, message });

    if sample.frames.is_empty() {
        push(None, "no frames".into());
    }
    for (i, frame) in sample.frames.iter().enumerate() {
        if frame.left.is_none() && frame.right.is_none() {
            push(Some(i), "no hand present".into());
        }
        for (side, hand) in [("left", &frame.left), ("right", &frame.right)] {
            let Some(joints) = hand else { continue };
            if joints.len() != JOINTS_PER_HAND {
                push(
                    Some(i),
                    format!("{side} hand joint count {} ≠ 21", joints.len()),
                );
            }
            if let Some(j) = joints
                .iter()
                .position(|p| p.iter().any(|c| !c.is_finite()))
            {
                push(Some(i), format!("{side} hand joint {} is not finite", j + 1));
            }
        }
    }
    if let Some(snips) = &sample.deep_snippets {
        let expected = sample.frames.len() / snippet_len.max(1);
        if snips.len() != expected {
            push(
                None,
                format!(
                    "{} snippets for {} frames (expected {expected})",
                    snips.len(),
                    sample.frames.len()
                ),
            );
        }
        if let Some(first) = snips.first() {
            if first.is_empty() {
                push(None, "snippet dimension is zero".into());
            }
            if let Some(k) = snips.iter().position(|s| s.len() != first.len()) {
                push(None, format!("snippet {k} has a different dimension"));
            }
        }
        if snips.iter().flatten().any(|v| !v.is_finite()) {
            push(None, "snippet values are not finite".into());
        }
    }
    out
}

impl TryFrom<SampleRecord> for SignSample {
    type Error = Error;

    fn try_from(rec: SampleRecord) -> Result<Self> {
        let violations = validate_sample(&rec);
        if let Some(v) = violations.first() {
            return Err(Error::invalid(format!("sample {}: {v}", rec.id)));
        }
        let frames = rec
            .frames
            .iter()
            .map(|f| {
                let left = f.left.as_deref().map(HandFrame::from_coords).transpose()?;
                let right = f.right.as_deref().map(HandFrame::from_coords).transpose()?;
                FrameSkeleton::new(left, right)
            })
            .collect::<Result<Vec<_>>>()?;
        let deep = rec.deep_snippets.map(DeepSnippets::new).transpose()?;
        SignSample::new(rec.id, rec.label, frames, deep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand(n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|i| [i as f64, 0.0, 1.0]).collect()
    }

    fn record(frames: Vec<FrameRecord>) -> SampleRecord {
        SampleRecord {
            id: "s0".into(),
            label: "hello".into(),
            frames,
            deep_snippets: None,
        }
    }

    #[test]
    fn valid_single_frame_has_empty_report() {
        let rec = record(vec![FrameRecord {
            left: Some(hand(21)),
            right: Some(hand(21)),
        }]);
        assert!(validate_sample(&rec).is_empty());
        assert!(SignSample::try_from(rec).is_ok());
    }

    #[test]
    fn twenty_joints_is_reported() {
        let rec = record(vec![FrameRecord {
            left: Some(hand(20)),
            right: None,
        }]);
        let report = validate_sample(&rec);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("joint count 20 ≠ 21"));
        assert_eq!(report[0].frame, Some(0));
    }

    #[test]
    fn frame_without_hands_is_reported() {
        let rec = record(vec![FrameRecord {
            left: None,
            right: None,
        }]);
        let report = validate_sample(&rec);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].message, "no hand present");
    }

    #[test]
    fn nan_joint_is_reported() {
        let mut h = hand(21);
        h[4][1] = f64::NAN;
        let rec = record(vec![FrameRecord {
            left: None,
            right: Some(h),
        }]);
        let report = validate_sample(&rec);
        assert!(report[0].message.contains("joint 5"));
    }

    #[test]
    fn snippet_count_must_match_frames() {
        let mut rec = record(
            (0..20)
                .map(|_| FrameRecord {
                    left: Some(hand(21)),
                    right: None,
                })
                .collect(),
        );
        rec.deep_snippets = Some(vec![vec![0.0; 4]; 2]);
        assert_eq!(validate_sample(&rec).len(), 1);
        rec.deep_snippets = Some(vec![vec![0.0; 4]; 1]);
        assert!(validate_sample(&rec).is_empty());
    }

    #[test]
    fn hand_frame_rejects_wrong_length() {
        assert!(HandFrame::from_coords(&hand(22)).is_err());
        let h = HandFrame::from_coords(&hand(21)).unwrap();
        assert_eq!(h.joint(1).x, 0.0);
        assert_eq!(h.joint(21).x, 20.0);
    }

    #[test]
    fn frame_needs_a_hand() {
        assert!(FrameSkeleton::new(None, None).is_err());
    }

    #[test]
    fn overlapping_split_is_rejected() {
        let err = SplitSpec::new(
            ["a".to_string(), "b".to_string()],
            ["b".to_string()],
            0,
            Protocol::P1,
        );
        assert!(err.is_err());
        assert!(SplitSpec::new(["a".to_string()], Vec::<String>::new(), 0, Protocol::P1).is_err());
        assert!(SplitSpec::new(["a".to_string()], ["b".to_string()], 0, Protocol::P2).is_ok());
    }

    #[test]
    fn embedding_set_rules() {
        let e = |l: &str, v: Vec<f64>| ClassEmbedding {
            label: l.into(),
            vector: v,
        };
        assert!(EmbeddingSet::new(vec![e("a", vec![1.0, 0.0]), e("a", vec![0.0, 1.0])]).is_err());
        assert!(EmbeddingSet::new(vec![e("a", vec![0.0, 0.0])]).is_err());
        assert!(EmbeddingSet::new(vec![e("a", vec![1.0]), e("b", vec![1.0, 2.0])]).is_err());
        let set = EmbeddingSet::new(vec![e("b", vec![1.0, 0.0]), e("a", vec![0.0, 1.0])]).unwrap();
        assert_eq!(set.labels().collect::<Vec<_>>(), ["b", "a"]);
    }

    #[test]
    fn layout_dims_are_fixed() {
        assert_eq!(Layout::SkelDist.dim(), 61);
        assert_eq!(Layout::SkelAng.dim(), 20);
        assert_eq!(Layout::SkelSvd.dim(), 35);
        assert_eq!(Layout::SkelAll.dim(), 116);
        assert_eq!(Layout::DeepLatent.dim(), 510);
        assert_eq!(Layout::Fused.dim(), 1024);
        assert!(FeatureVector::new(vec![0.0; 60], Layout::SkelDist).is_err());
        assert!(FeatureVector::new(vec![f64::NAN; 20], Layout::SkelAng).is_err());
    }

    #[test]
    fn deep_reads_are_counted_across_clones() {
        let d = DeepSnippets::new(vec![vec![1.0, 2.0]]).unwrap();
        let c = d.clone();
        let _ = c.vectors();
        assert_eq!(d.read_count(), 1);
        assert!(DeepSnippets::new(vec![]).is_err());
    }
}
