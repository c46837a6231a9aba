//! Seeded smooth random fields that vanish toward the ends of the domain.

use std::sync::Arc;

use rand::Rng;

use crate::grid::{Grid, ScalarField};

/// Number of Fourier modes in a smooth random field.
pub const NOISE_MODES: usize = 8;

/// Gaussian-windowed trigonometric sum with random coefficients; mode `k`
/// has wavenumber `k / width` and amplitude at most `1 / k`.
pub fn smooth_random(grid: &Arc<Grid>, rng: &mut impl Rng, width: f64) -> ScalarField {
    let coeffs: Vec<(f64, f64)> = (1..=NOISE_MODES)
        .map(|k| {
            let a = rng.gen_range(-1.0..1.0) / k as f64;
            let b = rng.gen_range(-1.0..1.0) / k as f64;
            (a, b)
        })
        .collect();
    let shift = rng.gen_range(-0.5..0.5) * width;
    grid.sample(|x| {
        let y = (x - shift) / width;
        let series: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = (k + 1) as f64 * y;
                a * w.cos() + b * w.sin()
            })
            .sum();
        (-0.5 * y * y).exp() * series
    })
}
