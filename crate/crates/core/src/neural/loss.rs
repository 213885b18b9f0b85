use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::numerics::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Cosine,
    Mse,
}

impl LossKind {
    pub fn eval(self, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            LossKind::Cosine => cosine_embedding_loss(pred, target),
            LossKind::Mse => mse_loss(pred, target),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(LossKind::Cosine),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::invalid(format!("unknown loss {other:?}"))),
        }
    }
}

/// `1 - cos(pred, target)` and its gradient w.r.t. `pred`.
pub fn cosine_embedding_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_dim("cosine loss", target.len(), pred.len())?;
    let np = norm(pred);
    let nt = norm(target);
    if np == 0.0 || nt == 0.0 {
        return Err(Error::ZeroNorm("cosine loss"));
    }
    let cos = dot(pred, target) / (np * nt);
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| -(t / (np * nt) - cos * p / (np * np)))
        .collect();
    Ok((1.0 - cos, grad))
}

/// Mean squared difference and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_dim("mse loss", target.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("mse of empty vectors"));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}
