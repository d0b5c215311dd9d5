//! Shared fixtures for the criterion benchmarks.

use fxpf_core::{ChannelFrame, TransducerGeometry};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The 128-element linear array used throughout the benchmarks.
pub fn standard_geometry() -> TransducerGeometry {
    TransducerGeometry::new(128, 0.3e-3, 5.208e6, 20.832e6, 1540.0).unwrap()
}

/// A deterministic white-noise frame, useful when only throughput matters.
pub fn random_frame(num_samples: usize, seed: u64) -> ChannelFrame {
    let geometry = standard_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = Array2::from_shape_fn((geometry.num_elements, num_samples), |_| {
        rng.random_range(-1.0..1.0)
    });
    ChannelFrame::new(geometry, samples, 0.0).unwrap()
}

/// Deterministic complex channel profile for single-bin filter benchmarks.
pub fn random_channels(n: usize, seed: u64) -> Vec<num_complex::Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}
