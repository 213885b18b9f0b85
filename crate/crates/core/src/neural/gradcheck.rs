//! Central finite-difference checks of every backward pass.
//!
//! Each check builds a random instance, takes the analytic gradient of a
//! scalar objective with respect to parameters and inputs, and compares it
//! coordinate-wise against `(f(x + ε) - f(x - ε)) / 2ε`.

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{cosine_embedding_loss, mse_loss, Activation, AutoEncoder, DenseLayer, LossKind, LstmCell, Params};
use crate::error::{Error, Result};
use crate::pipeline::{BatchItem, DeepEncoder, Network, ProjectionNet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tolerance: f64,
    /// Above this many coordinates a seeded random subset of this size is
    /// checked instead of all of them.
    pub max_coords: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            tolerance: 1e-4,
            max_coords: 10_000,
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Central difference of `f` at `x` along `coord`.
pub fn central_difference(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], coord: usize, eps: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[coord] = x[coord] + eps;
    let plus = f(&probe);
    probe[coord] = x[coord] - eps;
    let minus = f(&probe);
    (plus - minus) / (2.0 * eps)
}

/// Worst relative error between `analytic` and the numeric gradient of `f`
/// at `x`, plus the number of coordinates compared.
pub fn compare(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    cfg: &GradCheckConfig,
    rng: &mut impl Rng,
) -> (f64, usize) {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let coords: Vec<usize> = if x.len() > cfg.max_coords {
        let mut v = sample_indices(rng, x.len(), cfg.max_coords).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..x.len()).collect()
    };
    let worst = coords
        .iter()
        .map(|&c| relative_error(analytic[c], central_difference(&mut f, x, c, cfg.eps)))
        .fold(0.0, f64::max);
    (worst, coords.len())
}

fn gaussian_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

/// Splits `[params | inputs]` back into a copy of `model` and the inputs.
fn unpack<P: Params + Clone>(model: &P, flat: &[f64]) -> (P, Vec<f64>) {
    let np = model.num_params();
    let mut m = model.clone();
    m.set_flat(&flat[..np]);
    (m, flat[np..].to_vec())
}

fn joined(a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    let mut v = a;
    v.extend_from_slice(b);
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub component: String,
    pub instances: usize,
    pub coords: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Dense layer under `Σ r_i y_i`, both activations.
pub fn check_dense(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<(f64, usize)> {
    let input = rng.random_range(2..8);
    let output = rng.random_range(2..8);
    let act = if rng.random_bool(0.5) {
        Activation::Relu
    } else {
        Activation::Identity
    };
    let layer = DenseLayer::new(input, output, act, rng);
    let x = gaussian_vec(rng, input, 1.0);
    let r = Array1::from(gaussian_vec(rng, output, 1.0));
    let (dx, g) = layer.backward(Array1::from(x.clone()).view(), r.view())?;
    let f = |flat: &[f64]| {
        let (l, xin) = unpack(&layer, flat);
        l.forward(Array1::from(xin).view()).expect("shapes fixed").dot(&r)
    };
    Ok(compare(f, &joined(layer.flat(), &x), &joined(g.flat(), dx.as_slice().unwrap()), cfg, rng))
}

/// LSTM over a three-step sequence under `Σ r_i h_T,i`.
pub fn check_lstm(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<(f64, usize)> {
    let d = rng.random_range(2..6);
    let h = rng.random_range(2..6);
    let steps = 3;
    let cell = LstmCell::new(d, h, rng);
    let xs = gaussian_vec(rng, d * steps, 1.0);
    let r = Array1::from(gaussian_vec(rng, h, 1.0));
    let seq = |v: &[f64]| -> Vec<Array1<f64>> { v.chunks(d).map(|c| Array1::from(c.to_vec())).collect() };
    let inputs = seq(&xs);
    let trace = cell.forward_trace(inputs.iter().map(|a| a.view()))?;
    let (dxs, g) = cell.backward(&trace, r.view())?;
    let dx_flat: Vec<f64> = dxs.iter().flat_map(|a| a.iter().copied()).collect();
    let f = |flat: &[f64]| {
        let (c, xin) = unpack(&cell, flat);
        let s = seq(&xin);
        c.forward(s.iter().map(|a| a.view())).expect("shapes fixed").dot(&r)
    };
    Ok(compare(f, &joined(cell.flat(), &xs), &joined(g.flat(), &dx_flat), cfg, rng))
}

/// Autoencoder reconstruction loss.
pub fn check_autoencoder(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<(f64, usize)> {
    let h = rng.random_range(2..6);
    let ae = AutoEncoder::new(h, rng);
    let x = gaussian_vec(rng, h, 1.0);
    let (_, dx, g) = ae.reconstruction_loss(Array1::from(x.clone()).view())?;
    let f = |flat: &[f64]| {
        let (m, xin) = unpack(&ae, flat);
        let rec = m.reconstruct(ArrayView1::from(&xin)).expect("shapes fixed");
        mse_loss(rec.as_slice().unwrap(), &xin).expect("same length").0
    };
    Ok(compare(f, &joined(ae.flat(), &x), &joined(g.flat(), dx.as_slice().unwrap()), cfg, rng))
}

fn check_loss(
    rng: &mut ChaCha8Rng,
    cfg: &GradCheckConfig,
    loss: fn(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<(f64, usize)> {
    let n = rng.random_range(2..10);
    let pred = gaussian_vec(rng, n, 1.0);
    let target = gaussian_vec(rng, n, 1.0);
    let (_, g) = loss(&pred, &target)?;
    let f = |p: &[f64]| loss(p, &target).expect("non-zero vectors").0;
    Ok(compare(f, &pred, &g, cfg, rng))
}

pub fn check_cosine_loss(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<(f64, usize)> {
    check_loss(rng, cfg, cosine_embedding_loss)
}

pub fn check_mse_loss(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<(f64, usize)> {
    check_loss(rng, cfg, mse_loss)
}

/// Whole trainable stack: snippets → LSTM → encoder → concat with a skeleton
/// block → projection → cosine loss, plus the weighted reconstruction term.
/// Checked over every parameter and the skeleton inputs of a two-item batch.
pub fn check_projection_stack(rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<(f64, usize)> {
    let skel = rng.random_range(3..7);
    let d = 3;
    let h = 4;
    let hidden = rng.random_range(3..7);
    let e = rng.random_range(3..6);
    let deep = DeepEncoder {
        lstm: LstmCell::new(d, h, rng),
        autoencoder: AutoEncoder::new(h, rng),
    };
    let net = Network {
        projection: ProjectionNet::new(skel + deep.autoencoder.latent_dim(), hidden, e, rng),
        deep: Some(deep),
    };
    let loss = if rng.random_bool(0.5) {
        LossKind::Cosine
    } else {
        LossKind::Mse
    };
    let lambda = 0.1;

    let batch = 2;
    let skels: Vec<f64> = gaussian_vec(rng, skel * batch, 1.0);
    let snippets: Vec<Vec<Vec<f32>>> = (0..batch)
        .map(|_| {
            (0..2)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect())
                .collect()
        })
        .collect();
    let targets: Vec<Vec<f64>> = (0..batch).map(|_| gaussian_vec(rng, e, 1.0)).collect();

    fn items<'a>(sk: &'a [f64], snippets: &'a [Vec<Vec<f32>>], targets: &'a [Vec<f64>]) -> Vec<BatchItem<'a>> {
        let skel = sk.len() / targets.len();
        (0..targets.len())
            .map(|b| BatchItem {
                skeleton: &sk[b * skel..(b + 1) * skel],
                snippets: Some(&snippets[b]),
                target: &targets[b],
            })
            .collect()
    }
    let out = net.loss_and_grad(&items(&skels, &snippets, &targets), loss, lambda)?;
    let analytic = joined(out.grads.flat(), &out.skeleton_grads.concat());
    let f = |flat: &[f64]| {
        let (n, sk) = unpack(&net, flat);
        n.loss(&items(&sk, &snippets, &targets), loss, lambda).expect("shapes fixed")
    };
    Ok(compare(f, &joined(net.flat(), &skels), &analytic, cfg, rng))
}

const MAX_REDRAWS: usize = 100;

type CheckFn = fn(&mut ChaCha8Rng, &GradCheckConfig) -> Result<(f64, usize)>;

pub const COMPONENTS: [(&str, CheckFn); 6] = [
    ("dense", check_dense),
    ("lstm", check_lstm),
    ("autoencoder", check_autoencoder),
    ("cosine_loss", check_cosine_loss),
    ("mse_loss", check_mse_loss),
    ("projection_stack", check_projection_stack),
];

/// Runs `instances` random checks of every component.
pub fn run_all(instances: usize, seed: u64, cfg: &GradCheckConfig) -> Result<Vec<CheckReport>> {
    COMPONENTS
        .iter()
        .enumerate()
        .map(|(k, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut worst = 0.0f64;
            let mut coords = 0;
            for _ in 0..instances {
                // a draw whose cosine loss is undefined (all ReLUs dead gives
                // a zero prediction) is replaced by a fresh one
                let mut redraws = 0;
                let (err, n) = loop {
                    match check(&mut rng, cfg) {
                        Err(Error::ZeroNorm(_)) if redraws < MAX_REDRAWS => redraws += 1,
                        other => break other?,
                    }
                };
                worst = worst.max(err);
                coords += n;
            }
            Ok(CheckReport {
                component: name.to_string(),
                instances,
                coords,
                max_rel_error: worst,
                passed: worst < cfg.tolerance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn every_component_passes() {
        for r in run_all(3, 11, &GradCheckConfig::default()).unwrap() {
            assert!(r.passed, "{}: {}", r.component, r.max_rel_error);
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let cfg = GradCheckConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = |x: &[f64]| x[0] * x[0];
        let (err, _) = compare(f, &[1.5], &[2.0], &cfg, &mut rng);
        assert!(err > 0.1);
    }
}
