//! Deterministic inputs shared by the benchmarks.

use ndarray::Array2;
use qtn_core::data::Dataset;
use qtn_core::features::{feature_blocks, FactorBlock, FeatureSpec, Quantization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One-dimensional Fourier spec with `2^log2_m` basis functions.
pub fn fourier_1d(log2_m: u32, q: Quantization) -> FeatureSpec {
    FeatureSpec::fourier(vec![1 << log2_m], q, 1.0).expect("powers of two are valid")
}

/// Feature blocks of `n` points drawn uniformly from `[0, 1]^D`.
pub fn random_rows(spec: &FeatureSpec, n: usize, seed: u64) -> Vec<Vec<FactorBlock>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.dims()).map(|_| rng.random()).collect();
            feature_blocks(&x, spec).expect("inputs are in range")
        })
        .collect()
}

/// Smooth regression problem on `[0, 1]^d`.
pub fn smooth_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
    let y = x
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().map(|(i, v)| ((i + 1) as f64 * v).sin()).sum())
        .collect();
    Dataset::new(x, y, "bench").expect("finite values")
}
