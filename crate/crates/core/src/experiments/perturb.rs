//! Seeded tangent-plane perturbations of a base state.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::DEFAULT_CHART_RADIUS;
use crate::error::{Error, Result};
use crate::experiments::config::Shape;
use crate::grid::{dot3, Grid, NormKind, ScalarField, Sobolev, VectorField3};
use crate::noise::smooth_random;
use crate::profiles::{frame1_at, sech, FRAME2};

/// Width of the random-smooth window.
const NOISE_WIDTH: f64 = 2.0;

fn gaussian(grid: &Arc<Grid>, center: f64, amplitude: f64) -> ScalarField {
    grid.sample(|x| amplitude * (-(x - center).powi(2)).exp())
}

/// Unscaled mobile-frame coordinates `(r1, r2)` of the perturbation.
fn frame_profile(grid: &Arc<Grid>, shape: Shape, seed: u64) -> (ScalarField, ScalarField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match shape {
        Shape::Bump => (gaussian(grid, 0.5, 1.0), gaussian(grid, -0.3, 0.6)),
        Shape::RandomSmooth => {
            let r1 = smooth_random(grid, &mut rng, NOISE_WIDTH);
            let r2 = smooth_random(grid, &mut rng, NOISE_WIDTH);
            (r1, r2)
        }
        Shape::KernelTangent => {
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = grid.sample(sech);
            (s.scaled(phi.cos()), s.scaled(phi.sin()))
        }
    }
}

/// Tangent perturbation of exact H² norm `epsilon`, before renormalization.
pub fn perturbation(base: &VectorField3, shape: Shape, epsilon: f64, seed: u64) -> Result<VectorField3> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!("perturbation amplitude must be non-negative, got {epsilon}")));
    }
    if epsilon > DEFAULT_CHART_RADIUS {
        return Err(Error::OutsideChart { norm: epsilon, radius: DEFAULT_CHART_RADIUS });
    }
    let grid = &base.grid;
    let (r1, r2) = frame_profile(grid, shape, seed);
    let values = grid
        .nodes()
        .iter()
        .zip(&base.values)
        .enumerate()
        .map(|(i, (&x, &b))| {
            let m1 = frame1_at(x);
            let p: [f64; 3] = std::array::from_fn(|k| r1.values[i] * m1[k] + r2.values[i] * FRAME2[k]);
            let along = dot3(p, b) / dot3(b, b);
            std::array::from_fn(|k| p[k] - along * b[k])
        })
        .collect();
    let p = VectorField3::new(Arc::clone(grid), values)?;
    let size = p.norm(NormKind::H2);
    if epsilon == 0.0 || size == 0.0 {
        return Ok(VectorField3::uniform(grid, [0.0; 3]));
    }
    let s = epsilon / size;
    Ok(VectorField3 { grid: Arc::clone(grid), values: p.values.iter().map(|v| v.map(|c| c * s)).collect() })
}

/// `base + p` renormalized node-wise, where `p` is [`perturbation`].
pub fn perturb(base: &VectorField3, shape: Shape, epsilon: f64, seed: u64) -> Result<VectorField3> {
    let p = perturbation(base, shape, epsilon, seed)?;
    if epsilon == 0.0 {
        return Ok(base.clone());
    }
    let values = base
        .values
        .iter()
        .zip(&p.values)
        .map(|(b, d)| {
            let y: [f64; 3] = std::array::from_fn(|k| b[k] + d[k]);
            let r = dot3(y, y).sqrt();
            y.map(|c| c / r)
        })
        .collect();
    VectorField3::new(Arc::clone(&base.grid), values)
}
