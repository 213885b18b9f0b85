//! `key = value` experiment configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Later assignments win, so flag overrides are appended after the
//! file contents.

use std::path::Path;

use anyhow::{bail, Context, Result};
use zssl_core::features::{Aggregation, FeatureConfig};
use zssl_core::io::{LoadOptions, ShortVideoPolicy};
use zssl_core::neural::LossKind;
use zssl_core::EvalConfig;

pub const KEYS: &[&str] = &[
    "name",
    "features",
    "repeat_dist",
    "repeat_ang",
    "repeat_svd",
    "aggregation",
    "normalize",
    "snippet_len",
    "deep_input_dim",
    "lstm_hidden",
    "epochs",
    "lr",
    "batch",
    "loss",
    "lambda_recon",
    "seed",
    "projection_hidden",
    "standardize",
    "runs",
    "short_videos",
];

/// Effective experiment settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub eval: EvalConfig,
    /// `None` means "take it from the dataset".
    pub deep_input_dim: Option<usize>,
    pub short_videos: ShortVideoPolicy,
    /// Every assignment in application order, for the run manifest.
    pub assignments: Vec<(String, String)>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eval: EvalConfig::default(),
            deep_input_dim: None,
            short_videos: ShortVideoPolicy::Strict,
            assignments: Vec::new(),
        }
    }
}

pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("{origin} line {}: expected key = value", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}: cannot read config", path.display()))?;
    parse_pairs(&text, &path.display().to_string())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| anyhow::anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("{key}: expected a boolean, got {v:?}"),
    }
}

/// Parses `dist,ang,svd,deep` style family lists.
pub fn families(v: &str) -> Result<[bool; 4]> {
    let mut on = [false; 4];
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let i = match part {
            "dist" | "distances" => 0,
            "ang" | "angles" => 1,
            "svd" => 2,
            "deep" => 3,
            "all" => {
                on = [true; 4];
                continue;
            }
            "skeleton" => {
                on[..3].fill(true);
                continue;
            }
            other => bail!("unknown feature family {other:?} (expected dist, ang, svd, deep)"),
        };
        on[i] = true;
    }
    if !on.contains(&true) {
        bail!("feature list is empty");
    }
    Ok(on)
}

impl Settings {
    pub fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        let e = &mut self.eval;
        match key {
            "name" => e.name = v.to_string(),
            "features" => {
                let [d, a, s, deep] = families(v)?;
                e.features = FeatureConfig {
                    use_distances: d,
                    use_angles: a,
                    use_svd: s,
                    use_deep: deep,
                    ..e.features.clone()
                };
            }
            "repeat_dist" => e.features.repeat_dist = num(key, v)?,
            "repeat_ang" => e.features.repeat_ang = num(key, v)?,
            "repeat_svd" => e.features.repeat_svd = num(key, v)?,
            "aggregation" => {
                e.features.aggregation = match v {
                    "mean" => Aggregation::Mean,
                    "max" => Aggregation::Max,
                    _ => bail!("aggregation: expected mean or max, got {v:?}"),
                }
            }
            "normalize" => e.features.normalize = boolean(key, v)?,
            "snippet_len" => e.deep.snippet_len = num(key, v)?,
            "deep_input_dim" => {
                self.deep_input_dim = if v == "auto" { None } else { Some(num(key, v)?) };
            }
            "lstm_hidden" => e.deep.lstm_hidden = num(key, v)?,
            "epochs" => e.train.epochs = num(key, v)?,
            "lr" => e.train.lr = num(key, v)?,
            "batch" => e.train.batch = num(key, v)?,
            "loss" => e.train.loss = v.parse::<LossKind>()?,
            "lambda_recon" => e.train.lambda_recon = num(key, v)?,
            "seed" => {
                let s: u64 = num(key, v)?;
                e.base_seed = s;
                e.train.seed = s;
            }
            "projection_hidden" => e.train.projection_hidden = num(key, v)?,
            "standardize" => e.train.standardize = boolean(key, v)?,
            "runs" => e.runs = num(key, v)?,
            "short_videos" => self.short_videos = v.parse()?,
            other => bail!("unknown config key {other:?} (known: {})", KEYS.join(", ")),
        }
        self.assignments.push((key.to_string(), v.to_string()));
        Ok(())
    }

    pub fn load_options(&self, deep_channel: bool) -> LoadOptions {
        LoadOptions {
            deep_channel,
            snippet_len: self.eval.deep.snippet_len,
            short_videos: self.short_videos,
        }
    }

    /// Fills in the snippet dimension from the data when not pinned.
    pub fn resolve_deep_dim(&mut self, data_dim: Option<usize>) -> Result<()> {
        match (self.deep_input_dim, data_dim) {
            (Some(want), Some(got)) if want != got => {
                bail!("deep_input_dim is {want} but the dataset's snippets have {got} values")
            }
            (_, Some(got)) => self.eval.deep.input_dim = got,
            (Some(want), None) => self.eval.deep.input_dim = want,
            (None, None) => {}
        }
        Ok(())
    }
}
