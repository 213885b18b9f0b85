//! Shared fixtures for the criterion benches.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zssl_core::io::synth::{synth_dataset, SynthSpec};
use zssl_core::numerics::DenseMatrix;
use zssl_core::Dataset;

/// Small synthetic dataset: 10 classes, 8 samples each, 32 frames.
pub fn dataset() -> Dataset {
    synth_dataset(&SynthSpec {
        num_classes: 10,
        samples_per_class: 8,
        frames: 32,
        ..SynthSpec::default()
    })
    .expect("valid spec")
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).expect("sizes match")
}

pub fn random_sequence(len: usize, dim: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| Array1::from_iter((0..dim).map(|_| rng.random_range(-1.0..1.0))))
        .collect()
}
