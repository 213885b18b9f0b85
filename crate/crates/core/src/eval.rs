//! Class-split protocols, repeated runs and the feature ablation grid.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_batch, video_features, FeatureConfig};
use crate::io::Dataset;
use crate::model::{Protocol, SignSample, SplitSpec};
use crate::pipeline::{predict_prepared, train_prepared, DeepChannelConfig, Prediction, TrainConfig, ZslModel};

/// Shuffles `labels` with `seed` and cuts it into seen and unseen classes.
/// P1 keeps `floor(0.8 n)` seen and the rest unseen; P2 keeps `floor(0.5 n)`
/// of each and drops a leftover class when `n` is odd.
pub fn make_split(labels: &[String], protocol: Protocol, seed: u64) -> Result<SplitSpec> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {n}")));
    }
    let distinct: BTreeSet<&String> = labels.iter().collect();
    if distinct.len() != n {
        return Err(Error::invalid("duplicate class labels"));
    }
    let mut order = labels.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_seen, n_unseen) = match protocol {
        Protocol::P1 => (n * 8 / 10, n - n * 8 / 10),
        Protocol::P2 => (n / 2, n / 2),
    };
    let unseen: BTreeSet<String> = order[n_seen..n_seen + n_unseen].iter().cloned().collect();
    let seen: BTreeSet<String> = order.into_iter().take(n_seen).collect();
    SplitSpec::new(seen, unseen, seed, protocol)
}

/// Fraction of predictions whose true label ranks within the top `k` scores.
/// Equal scores rank in candidate order.
pub fn topk_accuracy(predictions: &[Prediction], k: usize) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions"));
    }
    let mut hits = 0;
    for p in predictions {
        let classes = p.scores.len();
        if k == 0 || k > classes {
            return Err(Error::invalid(format!("k = {k} outside 1..={classes}")));
        }
        let t = p
            .scores
            .iter()
            .position(|c| c.label == p.true_label)
            .ok_or_else(|| Error::invalid(format!("sample {}: true label not among candidates", p.id)))?;
        let score = p.scores[t].score;
        let rank = p
            .scores
            .iter()
            .enumerate()
            .filter(|(j, c)| c.score > score || (c.score == score && *j < t))
            .count();
        if rank < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / predictions.len() as f64)
}

/// Top-k accuracy over all samples, unscored ones counting as misses.
fn scored_accuracy(preds: &[Option<Prediction>], k: usize) -> Result<f64> {
    let scored: Vec<Prediction> = preds.iter().flatten().cloned().collect();
    if scored.is_empty() {
        return Ok(0.0);
    }
    Ok(topk_accuracy(&scored, k)? * scored.len() as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Name reported in the `config` column.
    pub name: String,
    pub features: FeatureConfig,
    pub deep: DeepChannelConfig,
    pub train: TrainConfig,
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            name: "default".into(),
            features: FeatureConfig::default(),
            deep: DeepChannelConfig::default(),
            train: TrainConfig::default(),
            runs: 10,
            base_seed: 0,
        }
    }
}

impl EvalConfig {
    /// FNV-1a hash of the JSON form, as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// One-based run index.
    pub run: usize,
    pub seed: u64,
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub top1: f64,
    /// Absent when fewer than five classes are unseen.
    pub top5: Option<f64>,
    /// Test samples whose projected embedding was zero; they count as misses.
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub config: String,
    pub fingerprint: String,
    pub protocol: Protocol,
    pub runs: Vec<RunResult>,
    pub mean_top1: f64,
    /// Population standard deviation (divides by the number of runs).
    pub std_top1: f64,
    pub mean_top5: Option<f64>,
}

impl ProtocolReport {
    pub fn from_runs(config: &EvalConfig, protocol: Protocol, runs: Vec<RunResult>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::invalid("report needs at least one run"));
        }
        let n = runs.len() as f64;
        let mean = runs.iter().map(|r| r.top1).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r.top1 - mean).powi(2)).sum::<f64>() / n;
        let top5: Option<Vec<f64>> = runs.iter().map(|r| r.top5).collect();
        Ok(ProtocolReport {
            config: config.name.clone(),
            fingerprint: config.fingerprint(),
            protocol,
            mean_top1: mean,
            std_top1: var.sqrt(),
            mean_top5: top5.map(|v| v.iter().sum::<f64>() / n),
            runs,
        })
    }
}

pub const REPORT_CSV_HEADER: &str = "config,protocol,mean_top1,std_top1,runs";

/// One CSV row per report, in the given order.
pub fn reports_to_csv(reports: &[ProtocolReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            r.config,
            r.protocol,
            r.mean_top1,
            r.std_top1,
            r.runs.len()
        )
        .expect("string write");
    }
    out
}

/// Pooled skeleton vector of every sample (`None`s when `cfg` has no
/// skeleton family).
fn pool_all(samples: &[SignSample], cfg: &FeatureConfig) -> Result<Vec<Option<Vec<f64>>>> {
    if !cfg.uses_skeleton() {
        return Ok(vec![None; samples.len()]);
    }
    Ok(extract_batch(samples, cfg)?
        .into_iter()
        .map(|f| Some(f.into_values()))
        .collect())
}

fn run_once(
    dataset: &Dataset,
    pooled: &[Option<Vec<f64>>],
    labels: &[String],
    protocol: Protocol,
    cfg: &EvalConfig,
    run: usize,
) -> Result<RunResult> {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let split = make_split(labels, protocol, seed)?;
    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    for (i, s) in dataset.samples.iter().enumerate() {
        if split.seen().contains(s.label()) {
            train_idx.push(i);
        } else if split.unseen().contains(s.label()) {
            test_idx.push(i);
        }
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::invalid("split left no training or no test samples"));
    }
    let seen_emb = dataset.embeddings.filter(|l| split.seen().contains(l))?;
    let unseen_emb = dataset.embeddings.filter(|l| split.unseen().contains(l))?;

    let train_samples: Vec<&SignSample> = train_idx.iter().map(|&i| &dataset.samples[i]).collect();
    let train_pooled: Vec<Option<Vec<f64>>> = train_idx.iter().map(|&i| pooled[i].clone()).collect();
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let model = train_prepared(&train_samples, &train_pooled, &seen_emb, &cfg.features, &cfg.deep, &tc)?.model;
    if let Some(l) = model.seen_labels.iter().find(|l| split.unseen().contains(*l)) {
        return Err(Error::invalid(format!("unseen class {l:?} leaked into training")));
    }
    if let Some(l) = unseen_emb.labels().find(|l| split.seen().contains(*l)) {
        return Err(Error::invalid(format!("seen class {l:?} leaked into the candidate set")));
    }

    let test_samples: Vec<&SignSample> = test_idx.iter().map(|&i| &dataset.samples[i]).collect();
    let test_pooled: Vec<Option<&[f64]>> = test_idx.iter().map(|&i| pooled[i].as_deref()).collect();
    let preds = predict_prepared(&test_samples, &test_pooled, &unseen_emb, &model)?;
    Ok(RunResult {
        run,
        seed,
        seen_classes: split.seen().len(),
        unseen_classes: split.unseen().len(),
        train_samples: train_idx.len(),
        test_samples: test_idx.len(),
        top1: scored_accuracy(&preds, 1)?,
        top5: (unseen_emb.len() >= 5).then(|| scored_accuracy(&preds, 5)).transpose()?,
        aborted: preds.iter().filter(|p| p.is_none()).count(),
    })
}

/// Runs `cfg.runs` independent splits (seeds `base_seed + 1 ..= base_seed +
/// runs`) and aggregates their accuracies. Runs execute on the current rayon
/// pool; results are ordered by run index.
pub fn run_protocol(dataset: &Dataset, protocol: Protocol, cfg: &EvalConfig) -> Result<ProtocolReport> {
    if cfg.runs == 0 {
        return Err(Error::invalid("runs must be >= 1"));
    }
    let labels = dataset.class_labels();
    for s in &dataset.samples {
        if !dataset.embeddings.contains(s.label()) {
            return Err(Error::invalid(format!("sample {}: label {:?} has no embedding", s.id(), s.label())));
        }
    }
    let pooled = pool_all(&dataset.samples, &cfg.features)?;
    let runs = (1..=cfg.runs)
        .into_par_iter()
        .map(|r| {
            run_once(dataset, &pooled, &labels, protocol, cfg, r)
                .map_err(|e| e.context(format!("{} {protocol} run {r}", cfg.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    ProtocolReport::from_runs(cfg, protocol, runs)
}

/// Scores an already trained model on every class of `dataset` it was not
/// trained on. The report holds a single run tagged with `protocol`.
pub fn evaluate_model(dataset: &Dataset, model: &ZslModel, name: &str, protocol: Protocol) -> Result<ProtocolReport> {
    let seen: BTreeSet<&str> = model.seen_labels.iter().map(String::as_str).collect();
    let unseen_emb = dataset
        .embeddings
        .filter(|l| !seen.contains(l) && dataset.samples.iter().any(|s| s.label() == l))
        .map_err(|_| Error::invalid("dataset has no classes the model was not trained on"))?;
    let test: Vec<&SignSample> = dataset
        .samples
        .iter()
        .filter(|s| unseen_emb.contains(s.label()))
        .collect();
    let pooled = if model.features.uses_skeleton() {
        test.par_iter()
            .map(|s| video_features(s, &model.features).map(|f| Some(f.into_values())))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; test.len()]
    };
    let pooled_refs: Vec<Option<&[f64]>> = pooled.iter().map(|p| p.as_deref()).collect();
    let preds = predict_prepared(&test, &pooled_refs, &unseen_emb, model)?;
    let cfg = EvalConfig {
        name: name.to_string(),
        features: model.features.clone(),
        deep: model.deep_config.clone(),
        train: model.train_config.clone(),
        runs: 1,
        base_seed: model.train_config.seed,
    };
    let run = RunResult {
        run: 1,
        seed: model.train_config.seed,
        seen_classes: seen.len(),
        unseen_classes: unseen_emb.len(),
        train_samples: 0,
        test_samples: test.len(),
        top1: scored_accuracy(&preds, 1)?,
        top5: (unseen_emb.len() >= 5).then(|| scored_accuracy(&preds, 5)).transpose()?,
        aborted: preds.iter().filter(|p| p.is_none()).count(),
    };
    ProtocolReport::from_runs(&cfg, protocol, vec![run])
}

/// One row of the feature ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationRow {
    pub key: &'static str,
    pub modality: &'static str,
    pub method: &'static str,
    pub distances: bool,
    pub angles: bool,
    pub svd: bool,
    pub deep: bool,
}

impl AblationRow {
    const fn new(key: &'static str, modality: &'static str, method: &'static str, f: [bool; 4]) -> Self {
        AblationRow {
            key,
            modality,
            method,
            distances: f[0],
            angles: f[1],
            svd: f[2],
            deep: f[3],
        }
    }

    /// `base` with this row's families switched on.
    pub fn features(&self, base: &FeatureConfig) -> FeatureConfig {
        FeatureConfig {
            use_distances: self.distances,
            use_angles: self.angles,
            use_svd: self.svd,
            use_deep: self.deep,
            ..base.clone()
        }
    }

    pub fn is_skeleton_only(&self) -> bool {
        !self.deep
    }
}

pub const ABLATION_ROWS: [AblationRow; 15] = [
    AblationRow::new("dist", "skeleton", "Distances", [true, false, false, false]),
    AblationRow::new("ang", "skeleton", "Angles", [false, true, false, false]),
    AblationRow::new("svd", "skeleton", "SVD", [false, false, true, false]),
    AblationRow::new("dist+ang", "skeleton", "Distances + Angles", [true, true, false, false]),
    AblationRow::new("svd+ang", "skeleton", "SVD + Angles", [false, true, true, false]),
    AblationRow::new("svd+dist", "skeleton", "SVD + Distances", [true, false, true, false]),
    AblationRow::new("dist+ang+svd", "skeleton", "Distances + Angles + SVD", [true, true, true, false]),
    AblationRow::new("deep", "rgb", "C3D + LSTM", [false, false, false, true]),
    AblationRow::new("dist+deep", "skeleton+rgb", "Distances + C3D + LSTM", [true, false, false, true]),
    AblationRow::new("ang+deep", "skeleton+rgb", "Angles + C3D + LSTM", [false, true, false, true]),
    AblationRow::new("svd+deep", "skeleton+rgb", "SVD + C3D + LSTM", [false, false, true, true]),
    AblationRow::new("ang+svd+deep", "skeleton+rgb", "Angles + SVD + C3D + LSTM", [false, true, true, true]),
    AblationRow::new("dist+svd+deep", "skeleton+rgb", "Distances + SVD + C3D + LSTM", [true, false, true, true]),
    AblationRow::new("dist+ang+deep", "skeleton+rgb", "Distances + Angles + C3D + LSTM", [true, true, false, true]),
    AblationRow::new(
        "dist+ang+svd+deep",
        "skeleton+rgb",
        "Distances + Angles + SVD + C3D + LSTM",
        [true, true, true, true],
    ),
];

/// Grid rows, optionally restricted to the given keys (kept in grid order).
pub fn select_rows(keys: Option<&[String]>) -> Result<Vec<AblationRow>> {
    let Some(keys) = keys else {
        return Ok(ABLATION_ROWS.to_vec());
    };
    for k in keys {
        if !ABLATION_ROWS.iter().any(|r| r.key == k) {
            let known: Vec<&str> = ABLATION_ROWS.iter().map(|r| r.key).collect();
            return Err(Error::invalid(format!("unknown ablation row {k:?} (known: {})", known.join(", "))));
        }
    }
    Ok(ABLATION_ROWS
        .iter()
        .filter(|r| keys.iter().any(|k| k == r.key))
        .copied()
        .collect())
}

fn deep_reads(dataset: &Dataset) -> usize {
    dataset
        .samples
        .iter()
        .filter_map(|s| s.deep().map(|d| d.read_count()))
        .sum()
}

/// Runs every row under every protocol; reports come row-major in grid
/// order. Rows without the deep channel are checked not to touch snippets.
pub fn ablation_suite(
    dataset: &Dataset,
    protocols: &[Protocol],
    rows: &[AblationRow],
    base: &EvalConfig,
) -> Result<Vec<ProtocolReport>> {
    if let Some(row) = rows.iter().find(|r| r.deep) {
        if dataset.deep_dim().is_none() {
            return Err(Error::invalid(format!(
                "row {:?} needs deep snippet features for every sample",
                row.key
            )));
        }
    }
    let mut out = Vec::with_capacity(rows.len() * protocols.len());
    for row in rows {
        let cfg = EvalConfig {
            name: row.key.to_string(),
            features: row.features(&base.features),
            ..base.clone()
        };
        for &protocol in protocols {
            let before = deep_reads(dataset);
            let report = run_protocol(dataset, protocol, &cfg)?;
            if row.is_skeleton_only() && deep_reads(dataset) != before {
                return Err(Error::invalid(format!("skeleton-only row {:?} read deep snippets", row.key)));
            }
            out.push(report);
        }
    }
    Ok(out)
}
