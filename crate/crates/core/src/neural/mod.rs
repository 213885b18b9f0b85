//! Trainable building blocks with hand-written backward passes.
//!
//! Every component implements [`Params`]: a fixed-order view of its
//! parameter tensors. Gradients use the same type as the component they
//! belong to, so the optimizer, the checkpoint writer and the finite
//! difference checker all walk parameters the same way.

mod adam;
mod autoencoder;
pub mod checkpoint;
mod dense;
pub mod gradcheck;
mod loss;
mod lstm;

pub use adam::{AdamConfig, AdamState};
pub use autoencoder::AutoEncoder;
pub use dense::{Activation, DenseLayer};
pub use loss::{cosine_embedding_loss, mse_loss, LossKind};
pub use lstm::{LstmCell, LstmTrace};

use rand::Rng;

/// Fixed-order access to a component's parameter tensors.
pub trait Params {
    /// `(name, shape)` of every tensor, in [`Params::slices`] order.
    fn shapes(&self) -> Vec<(String, Vec<usize>)>;
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut at = 0;
        for s in self.slices_mut() {
            let n = s.len();
            s.copy_from_slice(&values[at..at + n]);
            at += n;
        }
        assert_eq!(at, values.len(), "flat parameter length mismatch");
    }

    fn fill(&mut self, value: f64) {
        for s in self.slices_mut() {
            s.fill(value);
        }
    }

    /// `self += alpha * other`; both must share a layout.
    fn add_scaled(&mut self, alpha: f64, other: &Self)
    where
        Self: Sized,
    {
        for (d, s) in self.slices_mut().into_iter().zip(other.slices()) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += alpha * b;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn prefixed(prefix: &str, shapes: Vec<(String, Vec<usize>)>) -> Vec<(String, Vec<usize>)> {
    shapes
        .into_iter()
        .map(|(n, s)| (format!("{prefix}.{n}"), s))
        .collect()
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn xavier(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
