//! Handcrafted skeleton features: joint distances, finger angles and
//! singular values of keypoint matrices, temporal pooling, and the
//! repetition-weighted fusion with the deep latent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::model::{FeatureVector, FrameSkeleton, HandFrame, Layout, Point3, SignSample};
use crate::numerics::{singular_values, DenseMatrix};

/// Per-hand joint pairs for distance features (1-based).
pub const DISTANCE_PAIRS: [(usize, usize); 20] = [
    (5, 9),
    (9, 13),
    (13, 17),
    (17, 21),
    (5, 1),
    (9, 1),
    (13, 1),
    (17, 1),
    (21, 1),
    (5, 2),
    (9, 6),
    (13, 10),
    (17, 14),
    (21, 18),
    (9, 4),
    (9, 12),
    (13, 8),
    (13, 16),
    (17, 12),
    (17, 20),
];

/// Per-hand joint triples for angle features; the angle is taken at the
/// middle joint.
pub const ANGLE_TRIPLES: [(usize, usize, usize); 10] = [
    (2, 3, 4),
    (3, 4, 5),
    (6, 7, 8),
    (7, 8, 9),
    (10, 11, 12),
    (11, 12, 13),
    (14, 15, 16),
    (15, 16, 17),
    (18, 19, 20),
    (19, 20, 21),
];

pub const DIST_DIM: usize = 61;
pub const ANG_DIM: usize = 20;
pub const SVD_DIM: usize = 35;
pub const DEEP_LATENT_DIM: usize = 510;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub use_distances: bool,
    pub use_angles: bool,
    pub use_svd: bool,
    pub use_deep: bool,
    pub repeat_dist: usize,
    pub repeat_ang: usize,
    pub repeat_svd: usize,
    pub aggregation: Aggregation,
    /// Wrist-centre each hand and divide by its mean bone length.
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            use_distances: true,
            use_angles: true,
            use_svd: true,
            use_deep: true,
            repeat_dist: 4,
            repeat_ang: 3,
            repeat_svd: 6,
            aggregation: Aggregation::Mean,
            normalize: false,
        }
    }
}

impl FeatureConfig {
    pub fn skeleton_only() -> Self {
        FeatureConfig {
            use_deep: false,
            ..Self::default()
        }
    }

    /// Config with exactly the given families switched on.
    pub fn families(dist: bool, ang: bool, svd: bool, deep: bool) -> Self {
        FeatureConfig {
            use_distances: dist,
            use_angles: ang,
            use_svd: svd,
            use_deep: deep,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.use_distances || self.use_angles || self.use_svd || self.use_deep) {
            return Err(Error::invalid("no feature family enabled"));
        }
        if self.repeat_dist == 0 || self.repeat_ang == 0 || self.repeat_svd == 0 {
            return Err(Error::invalid("repetition counts must be >= 1"));
        }
        Ok(())
    }

    pub fn uses_skeleton(&self) -> bool {
        self.use_distances || self.use_angles || self.use_svd
    }

    /// Length of one (un-repeated) per-frame skeleton vector.
    pub fn skeleton_dim(&self) -> usize {
        self.use_distances as usize * DIST_DIM
            + self.use_angles as usize * ANG_DIM
            + self.use_svd as usize * SVD_DIM
    }

    /// Length of the repeated skeleton block.
    pub fn repeated_dim(&self) -> usize {
        self.use_distances as usize * DIST_DIM * self.repeat_dist
            + self.use_angles as usize * ANG_DIM * self.repeat_ang
            + self.use_svd as usize * SVD_DIM * self.repeat_svd
    }

    /// Length of the fused visual vector.
    pub fn visual_dim(&self) -> usize {
        self.repeated_dim() + self.use_deep as usize * DEEP_LATENT_DIM
    }

    fn skeleton_layout(&self) -> Layout {
        match (self.use_distances, self.use_angles, self.use_svd) {
            (true, true, true) => Layout::SkelAll,
            (true, false, false) => Layout::SkelDist,
            (false, true, false) => Layout::SkelAng,
            (false, false, true) => Layout::SkelSvd,
            _ => Layout::Custom(self.skeleton_dim()),
        }
    }
}

/// Returns `(left, right)`, substituting the present hand for a missing one.
pub fn duplicate_single_hand(frame: &FrameSkeleton) -> Result<(HandFrame, HandFrame)> {
    match (frame.left(), frame.right()) {
        (Some(l), Some(r)) => Ok((*l, *r)),
        (Some(h), None) | (None, Some(h)) => Ok((*h, *h)),
        (None, None) => Err(Error::invalid("no hand present")),
    }
}

pub fn distance_features(left: &HandFrame, right: &HandFrame) -> FeatureVector {
    let mut out = Vec::with_capacity(DIST_DIM);
    for hand in [left, right] {
        out.extend(
            DISTANCE_PAIRS
                .iter()
                .map(|&(a, b)| hand.joint(a).distance(hand.joint(b))),
        );
    }
    out.extend(
        left.joints()
            .iter()
            .zip(right.joints())
            .map(|(l, r)| l.distance(r)),
    );
    FeatureVector::new(out, Layout::SkelDist).expect("distances of finite points")
}

fn joint_angle(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let u = a.sub(b);
    let v = c.sub(b);
    if u.norm() == 0.0 || v.norm() == 0.0 {
        log::warn!("zero-length bone in angle feature; using 0");
        return 0.0;
    }
    u.cross(&v).norm().atan2(u.dot(&v))
}

pub fn angle_features(left: &HandFrame, right: &HandFrame) -> FeatureVector {
    let out: Vec<f64> = [left, right]
        .iter()
        .flat_map(|hand| {
            ANGLE_TRIPLES
                .iter()
                .map(|&(a, b, c)| joint_angle(hand.joint(a), hand.joint(b), hand.joint(c)))
        })
        .collect();
    FeatureVector::new(out, Layout::SkelAng).expect("angles are finite")
}

/// 4×15 finger matrix: row `r` holds the r-th joint of every finger, fingers
/// side by side as xyz column triples. The wrist is not used.
fn finger_matrix(hand: &HandFrame) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(4, 15);
    for r in 0..4 {
        for f in 1..=5 {
            let p = hand.joint(4 * f - 2 + r);
            let col = 3 * (f - 1);
            m.set(r, col, p.x);
            m.set(r, col + 1, p.y);
            m.set(r, col + 2, p.z);
        }
    }
    m
}

/// 21×3 matrix of all joints.
fn joint_matrix(hand: &HandFrame) -> DenseMatrix {
    let data = hand.joints().iter().flat_map(|p| p.to_array()).collect();
    DenseMatrix::new(21, 3, data).expect("finite joints")
}

fn hstack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.rows(), b.rows());
    let mut data = Vec::with_capacity(a.rows() * (a.cols() + b.cols()));
    for r in 0..a.rows() {
        data.extend_from_slice(&a.data()[r * a.cols()..(r + 1) * a.cols()]);
        data.extend_from_slice(&b.data()[r * b.cols()..(r + 1) * b.cols()]);
    }
    DenseMatrix::new(a.rows(), a.cols() + b.cols(), data).expect("finite")
}

fn vstack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.cols(), b.cols());
    let data = [a.data(), b.data()].concat();
    DenseMatrix::new(a.rows() + b.rows(), a.cols(), data).expect("finite")
}

/// The keypoint matrices whose singular values make up the SVD features, in
/// output order: left 4×15, left 21×3, right 4×15, right 21×3, then 21×6,
/// 42×3, 8×15 and 4×30.
pub fn svd_matrices(left: &HandFrame, right: &HandFrame) -> [DenseMatrix; 8] {
    let fl = finger_matrix(left);
    let fr = finger_matrix(right);
    let jl = joint_matrix(left);
    let jr = joint_matrix(right);
    [
        fl.clone(),
        jl.clone(),
        fr.clone(),
        jr.clone(),
        hstack(&jl, &jr),
        vstack(&jl, &jr),
        vstack(&fl, &fr),
        hstack(&fl, &fr),
    ]
}

pub fn svd_features(left: &HandFrame, right: &HandFrame) -> Result<FeatureVector> {
    let mut out = Vec::with_capacity(SVD_DIM);
    for m in svd_matrices(left, right) {
        out.extend(singular_values(&m)?);
    }
    FeatureVector::new(out, Layout::SkelSvd)
}

fn normalize_hand(hand: &HandFrame) -> Result<HandFrame> {
    let wrist = *hand.joint(1);
    let mut total = 0.0;
    for f in 1..=5 {
        let base = 4 * f - 2;
        total += hand.joint(1).distance(hand.joint(base));
        for k in 0..3 {
            total += hand.joint(base + k).distance(hand.joint(base + k + 1));
        }
    }
    let mean_bone = total / 20.0;
    let scale = if mean_bone > 0.0 { 1.0 / mean_bone } else { 1.0 };
    hand.map(|p| p.sub(&wrist).scale(scale))
}

/// Concatenation of the enabled families (distances, angles, svd) for one
/// frame, after one-hand duplication.
pub fn frame_features(frame: &FrameSkeleton, config: &FeatureConfig) -> Result<FeatureVector> {
    let (mut left, mut right) = duplicate_single_hand(frame)?;
    if config.normalize {
        left = normalize_hand(&left)?;
        right = normalize_hand(&right)?;
    }
    let mut out = Vec::with_capacity(config.skeleton_dim());
    if config.use_distances {
        out.extend_from_slice(distance_features(&left, &right).values());
    }
    if config.use_angles {
        out.extend_from_slice(angle_features(&left, &right).values());
    }
    if config.use_svd {
        out.extend_from_slice(svd_features(&left, &right)?.values());
    }
    FeatureVector::new(out, config.skeleton_layout())
}

/// Elementwise mean or max over frames.
pub fn aggregate_video(frames: &[FeatureVector], config: &FeatureConfig) -> Result<FeatureVector> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty frame sequence"))?;
    let dim = first.len();
    for f in frames {
        ensure_dim("aggregate_video", dim, f.len())?;
    }
    let values = match config.aggregation {
        Aggregation::Mean => {
            let mut acc = vec![0.0; dim];
            for f in frames {
                for (a, v) in acc.iter_mut().zip(f.values()) {
                    *a += v;
                }
            }
            let n = frames.len() as f64;
            acc.into_iter().map(|a| a / n).collect()
        }
        Aggregation::Max => {
            let mut acc = first.values().to_vec();
            for f in &frames[1..] {
                for (a, v) in acc.iter_mut().zip(f.values()) {
                    *a = a.max(*v);
                }
            }
            acc
        }
    };
    FeatureVector::new(values, first.layout())
}

/// Aggregated skeleton vector of one video (un-repeated).
pub fn video_features(sample: &SignSample, config: &FeatureConfig) -> Result<FeatureVector> {
    if !config.uses_skeleton() {
        return Err(Error::invalid("no skeleton family enabled"));
    }
    let per_frame = sample
        .frames()
        .iter()
        .map(|f| frame_features(f, config))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::invalid(format!("sample {}: {e}", sample.id())))?;
    aggregate_video(&per_frame, config)
}

/// [`video_features`] over many samples in parallel; output order follows
/// input order and does not depend on the worker count.
pub fn extract_batch(samples: &[SignSample], config: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    samples
        .par_iter()
        .map(|s| video_features(s, config))
        .collect()
}

/// Skeleton family vectors ready for fusion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkeletonBlocks {
    pub distances: Option<FeatureVector>,
    pub angles: Option<FeatureVector>,
    pub svd: Option<FeatureVector>,
}

impl SkeletonBlocks {
    /// Splits a concatenated skeleton vector according to `config`.
    pub fn split(concat: &[f64], config: &FeatureConfig) -> Result<Self> {
        ensure_dim("skeleton split", config.skeleton_dim(), concat.len())?;
        let mut at = 0;
        let mut take = |on: bool, layout: Layout| -> Result<Option<FeatureVector>> {
            if !on {
                return Ok(None);
            }
            let n = layout.dim();
            let v = FeatureVector::new(concat[at..at + n].to_vec(), layout)?;
            at += n;
            Ok(Some(v))
        };
        Ok(SkeletonBlocks {
            distances: take(config.use_distances, Layout::SkelDist)?,
            angles: take(config.use_angles, Layout::SkelAng)?,
            svd: take(config.use_svd, Layout::SkelSvd)?,
        })
    }
}

fn tile(out: &mut Vec<f64>, block: &FeatureVector, times: usize) {
    for _ in 0..times {
        out.extend_from_slice(block.values());
    }
}

/// Tiles each enabled family block its repetition count (distances, angles,
/// svd in that order) and appends the deep latent when given.
pub fn repeat_fuse(
    skel: &SkeletonBlocks,
    deep: Option<&FeatureVector>,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let mut out = Vec::with_capacity(config.visual_dim());
    let families = [
        (config.use_distances, &skel.distances, Layout::SkelDist, config.repeat_dist, "distances"),
        (config.use_angles, &skel.angles, Layout::SkelAng, config.repeat_ang, "angles"),
        (config.use_svd, &skel.svd, Layout::SkelSvd, config.repeat_svd, "svd"),
    ];
    for (on, block, layout, times, name) in families {
        if !on {
            continue;
        }
        let block = block
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{name} block missing")))?;
        ensure_dim("repeat_fuse family block", layout.dim(), block.len())?;
        tile(&mut out, block, times);
    }
    if let Some(d) = deep {
        ensure_dim("repeat_fuse deep latent", DEEP_LATENT_DIM, d.len())?;
        out.extend_from_slice(d.values());
    }
    if out.is_empty() {
        return Err(Error::invalid("nothing to fuse"));
    }
    FeatureVector::custom(out)
}

/// Repeats the concatenated (un-repeated) skeleton vector in place of
/// [`SkeletonBlocks::split`] + [`repeat_fuse`] when no deep latent is needed.
pub fn repeat_skeleton(concat: &[f64], config: &FeatureConfig) -> Result<Vec<f64>> {
    let blocks = SkeletonBlocks::split(concat, config)?;
    let mut out = Vec::with_capacity(config.repeated_dim());
    for (block, times) in [
        (&blocks.distances, config.repeat_dist),
        (&blocks.angles, config.repeat_ang),
        (&blocks.svd, config.repeat_svd),
    ] {
        if let Some(b) = block {
            tile(&mut out, b, times);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn hand_from(f: impl Fn(usize) -> [f64; 3]) -> HandFrame {
        let coords: Vec<[f64; 3]> = (1..=21).map(f).collect();
        HandFrame::from_coords(&coords).unwrap()
    }

    fn sample_hand(seed: f64) -> HandFrame {
        hand_from(|j| {
            let j = j as f64;
            [
                (j * 1.3 + seed).sin() * 2.0,
                (j * 0.7 - seed).cos() * 1.5,
                j * 0.1 + seed,
            ]
        })
    }

    #[test]
    fn duplication_rule() {
        let a = sample_hand(0.1);
        let b = sample_hand(0.9);
        let f = FrameSkeleton::new(Some(a), None).unwrap();
        assert_eq!(duplicate_single_hand(&f).unwrap(), (a, a));
        let f = FrameSkeleton::new(None, Some(b)).unwrap();
        assert_eq!(duplicate_single_hand(&f).unwrap(), (b, b));
        assert_eq!(duplicate_single_hand(&FrameSkeleton::both(a, b)).unwrap(), (a, b));
    }

    #[test]
    fn duplicated_hand_has_zero_peer_distances() {
        let h = sample_hand(0.4);
        let d = distance_features(&h, &h);
        assert_eq!(d.len(), 61);
        assert!(d.values()[40..].iter().all(|v| *v == 0.0));
        assert_eq!(d.values()[..20], d.values()[20..40]);
    }

    #[test]
    fn three_four_five_distance() {
        let h = hand_from(|j| match j {
            1 => [0.0, 0.0, 0.0],
            5 => [3.0, 4.0, 0.0],
            _ => [j as f64, 1.0, 2.0],
        });
        let d = distance_features(&h, &h);
        // (5,1) is the fifth pair.
        assert_eq!(d.values()[4], 5.0);
    }

    #[test]
    fn straight_and_right_angles() {
        let straight = joint_angle(
            &Point3::new(0.0, 0.0, 0.0),
            &Point3::new(1.0, 0.0, 0.0),
            &Point3::new(2.0, 0.0, 0.0),
        );
        assert!((straight - PI).abs() < 1e-15);
        let right = joint_angle(
            &Point3::new(0.0, 0.0, 0.0),
            &Point3::new(1.0, 0.0, 0.0),
            &Point3::new(1.0, 1.0, 0.0),
        );
        assert!((right - FRAC_PI_2).abs() < 1e-15);
        let degenerate = joint_angle(&Point3::ORIGIN, &Point3::ORIGIN, &Point3::new(1.0, 0.0, 0.0));
        assert_eq!(degenerate, 0.0);
        let h = sample_hand(0.3);
        assert_eq!(angle_features(&h, &h).len(), 20);
    }

    #[test]
    fn finger_matrix_layout() {
        let h = hand_from(|j| [j as f64, 10.0 * j as f64, 100.0 * j as f64]);
        let m = finger_matrix(&h);
        // row 0 holds finger bases 2, 6, 10, 14, 18
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 3), 6.0);
        assert_eq!(m.get(0, 14), 1800.0);
        // row 3 holds tips 5, 9, ..., 21
        assert_eq!(m.get(3, 0), 5.0);
        assert_eq!(m.get(3, 12), 21.0);
    }

    #[test]
    fn origin_pose_gives_zero_svd() {
        let h = hand_from(|_| [0.0; 3]);
        let s = svd_features(&h, &h).unwrap();
        assert_eq!(s.values(), &[0.0; 35][..]);
    }

    #[test]
    fn frame_feature_lengths() {
        let f = FrameSkeleton::both(sample_hand(0.2), sample_hand(1.1));
        let all = FeatureConfig::default();
        assert_eq!(frame_features(&f, &all).unwrap().len(), 116);
        assert_eq!(frame_features(&f, &all).unwrap().layout(), Layout::SkelAll);
        let dist = FeatureConfig::families(true, false, false, false);
        assert_eq!(frame_features(&f, &dist).unwrap().len(), 61);
        let svd = FeatureConfig::families(false, false, true, false);
        assert_eq!(frame_features(&f, &svd).unwrap().len(), 35);
    }

    #[test]
    fn aggregation_examples() {
        let cfg = FeatureConfig::default();
        let a = FeatureVector::custom(vec![0.0, 2.0]).unwrap();
        let b = FeatureVector::custom(vec![4.0, 0.0]).unwrap();
        assert_eq!(aggregate_video(std::slice::from_ref(&a), &cfg).unwrap(), a);
        assert_eq!(aggregate_video(&[a.clone(), a.clone()], &cfg).unwrap(), a);
        assert_eq!(
            aggregate_video(&[a.clone(), b.clone()], &cfg).unwrap().values(),
            &[2.0, 1.0]
        );
        let max = FeatureConfig {
            aggregation: Aggregation::Max,
            ..cfg.clone()
        };
        assert_eq!(
            aggregate_video(&[a.clone(), b], &max).unwrap().values(),
            &[4.0, 2.0]
        );
        assert!(aggregate_video(&[], &cfg).is_err());
        let c = FeatureVector::custom(vec![1.0]).unwrap();
        assert!(aggregate_video(&[a, c], &cfg).is_err());
    }

    #[test]
    fn fusion_tiles_constant_blocks() {
        let cfg = FeatureConfig::default();
        let blocks = SkeletonBlocks {
            distances: Some(FeatureVector::new(vec![1.0; 61], Layout::SkelDist).unwrap()),
            angles: Some(FeatureVector::new(vec![2.0; 20], Layout::SkelAng).unwrap()),
            svd: Some(FeatureVector::new(vec![3.0; 35], Layout::SkelSvd).unwrap()),
        };
        let deep = FeatureVector::new(vec![4.0; 510], Layout::DeepLatent).unwrap();
        let fused = repeat_fuse(&blocks, Some(&deep), &cfg).unwrap();
        assert_eq!(fused.len(), 1024);
        assert_eq!(fused.layout(), Layout::Fused);
        let v = fused.values();
        assert!(v[..244].iter().all(|x| *x == 1.0));
        assert!(v[244..304].iter().all(|x| *x == 2.0));
        assert!(v[304..514].iter().all(|x| *x == 3.0));
        assert!(v[514..].iter().all(|x| *x == 4.0));

        let skel = repeat_fuse(&blocks, None, &cfg).unwrap();
        assert_eq!(skel.len(), 514);
        let concat: Vec<f64> = [vec![1.0; 61], vec![2.0; 20], vec![3.0; 35]].concat();
        assert_eq!(repeat_skeleton(&concat, &cfg).unwrap(), skel.values());

        let short = FeatureVector::new(vec![0.0; 20], Layout::SkelAng).unwrap();
        assert!(repeat_fuse(&blocks, Some(&short), &cfg).is_err());
    }

    #[test]
    fn config_requires_a_family() {
        assert!(FeatureConfig::families(false, false, false, false).validate().is_err());
        assert!(FeatureConfig::default().validate().is_ok());
        let bad = FeatureConfig {
            repeat_svd: 0,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn normalization_centres_the_wrist() {
        let h = sample_hand(0.5);
        let n = normalize_hand(&h).unwrap();
        assert_eq!(*n.joint(1), Point3::ORIGIN);
    }
}
