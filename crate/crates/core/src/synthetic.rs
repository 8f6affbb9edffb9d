//! Deterministic stand-ins for benchmark datasets that cannot be shipped with
//! the crate. Both return unscaled inputs; `data::split` applies the unit-box
//! scaling.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::Result;

/// Froude numbers 0.125, 0.150, ..., 0.450.
pub const FROUDE_STEPS: usize = 14;
pub const HULL_FORMS: usize = 22;

/// Yacht-hydrodynamics-shaped table: 22 hull forms, each towed at 14 Froude
/// numbers (308 rows, 6 inputs). Residuary resistance grows roughly
/// exponentially with Froude number, with a hull-dependent hump near 0.3 and
/// multiplicative hull effects.
///
/// Columns: buoyancy position, prismatic coefficient, length-displacement,
/// beam-draught, length-beam, Froude number.
pub fn yacht_like(seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut x = Vec::with_capacity(HULL_FORMS * FROUDE_STEPS * 6);
    let mut y = Vec::with_capacity(HULL_FORMS * FROUDE_STEPS);
    for _ in 0..HULL_FORMS {
        let lcb = rng.random_range(-5.0..0.0);
        let cp = rng.random_range(0.53..0.60);
        let ld = rng.random_range(4.34..5.14);
        let bd = rng.random_range(2.81..5.35);
        let lb = rng.random_range(2.73..3.64);
        let hull = 1.0 + 0.25 * (cp - 0.565) / 0.035 - 0.15 * (ld - 4.74) / 0.4 + 0.1 * (bd - 4.08) / 1.27
            - 0.08 * (lb - 3.18) / 0.45
            + 0.05 * lcb / 2.5;
        let hump = 2.0 * (cp - 0.53) / 0.07 + 0.5;
        for s in 0..FROUDE_STEPS {
            let fr = 0.125 + 0.025 * s as f64;
            let clean = 0.2 * (17.0 * (fr - 0.125)).exp() * hull + hump * (-((fr - 0.3) / 0.04).powi(2)).exp();
            let value = clean * (1.0 + 0.02 * noise.sample(&mut rng)) + 0.05 * noise.sample(&mut rng);
            x.extend_from_slice(&[lcb, cp, ld, bd, lb, fr]);
            y.push(value.max(0.01));
        }
    }
    let x = Array2::from_shape_vec((y.len(), 6), x).expect("row-major table");
    Dataset::new(x, y, format!("synthetic yacht-like table (seed {seed})"))
}

/// Eight-input regression problem with smooth interactions and heavy noise,
/// shaped like the flight-delay benchmark.
pub fn airline_like(num_samples: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let mut x = Vec::with_capacity(num_samples * 8);
    let mut y = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let row: [f64; 8] = std::array::from_fn(|_| rng.random::<f64>());
        let clean = (2.0 * PI * row[0]).sin() * row[1]
            + 0.5 * (2.0 * PI * (row[2] + row[3])).cos()
            + 0.3 * row[4] * row[5]
            + 0.2 * row[6].exp()
            - 0.4 * (row[7] - 0.5).powi(2);
        x.extend_from_slice(&row);
        y.push(clean + noise.sample(&mut rng));
    }
    let x = Array2::from_shape_vec((num_samples, 8), x).expect("row-major table");
    Dataset::new(x, y, format!("synthetic airline-like table (seed {seed})"))
}
