//! Coordinates of a magnetization state relative to the wall family.
//!
//! A state close to the wall is written in the mobile frame as a pair of
//! scalar fields `r = (r1, r2)`, and `r` is split further into collective
//! coordinates `Λ = (θ, σ)` plus a residual `W` that is L²-orthogonal to both
//! kernel modes.
//!
//! A [`WallChart`] may be centred on any member of the wall family; the
//! default is the static wall. Centring on the traveling wall at time `t`
//! gives co-moving coordinates for laboratory-frame states.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{dot3, weighted_dot, FieldPair, Grid, NormKind, ScalarField, Sobolev, VectorField3};
use crate::profiles::{frame1_at, rotate, sech, wall_at, CollectiveCoordinates, FRAME2};

/// Mobile-frame coordinates; `first` is `r1`, `second` is `r2`.
pub type FrameCoordinates = FieldPair;

#[derive(Debug, Clone)]
pub struct WallDecomposition {
    pub lambda: CollectiveCoordinates,
    pub w: FieldPair,
    /// `(<W, v1>, <W, v2>)`.
    pub residuals: (f64, f64),
    pub iterations: usize,
}

pub const DEFAULT_CHART_RADIUS: f64 = 0.5;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;
const RESIDUAL_TOL: f64 = 1e-12;
const STEP_TOL: f64 = 1e-14;

/// `R_Λ(y)` and its partial derivatives in `θ` and `σ`.
#[derive(Debug, Clone, Copy)]
struct FamilyJet {
    value: [f64; 2],
    d_theta: [f64; 2],
    d_sigma: [f64; 2],
}

fn family_jet(lambda: CollectiveCoordinates, y: f64) -> FamilyJet {
    let (s, c) = lambda.theta.sin_cos();
    let z = y - lambda.sigma;
    let (tz, sz) = (z.tanh(), sech(z));
    let (ty, sy) = (y.tanh(), sech(y));
    FamilyJet {
        value: [tz * sy - c * sz * ty, -s * sz],
        d_theta: [s * sz * ty, -c * sz],
        d_sigma: [-sz * sz * sy - c * sz * tz * ty, -s * sz * tz],
    }
}

#[derive(Debug, Clone)]
pub struct WallChart {
    grid: Arc<Grid>,
    reference: CollectiveCoordinates,
    m0: Vec<[f64; 3]>,
    m1: Vec<[f64; 3]>,
    m2: [f64; 3],
    /// Shifted abscissas `x - σ_ref`.
    y: Vec<f64>,
    kernel: ScalarField,
    kernel_norm2: f64,
    pub radius: f64,
    pub max_iterations: usize,
}

impl WallChart {
    /// Chart around the static wall.
    pub fn new(grid: &Arc<Grid>) -> Self {
        Self::centered(grid, CollectiveCoordinates::ZERO)
    }

    /// Chart around `M_ref = R_θref M0(· - σref)`.
    pub fn centered(grid: &Arc<Grid>, reference: CollectiveCoordinates) -> Self {
        let y: Vec<f64> = grid.nodes().iter().map(|x| x - reference.sigma).collect();
        let m0 = y.iter().map(|&y| rotate(reference.theta, wall_at(y))).collect();
        let m1 = y.iter().map(|&y| rotate(reference.theta, frame1_at(y))).collect();
        let kernel = ScalarField { grid: Arc::clone(grid), values: y.iter().map(|&y| sech(y)).collect() };
        let kernel_norm2 = weighted_dot(grid, &kernel.values, &kernel.values);
        WallChart {
            grid: Arc::clone(grid),
            reference,
            m0,
            m1,
            m2: rotate(reference.theta, FRAME2),
            y,
            kernel,
            kernel_norm2,
            radius: DEFAULT_CHART_RADIUS,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn reference(&self) -> CollectiveCoordinates {
        self.reference
    }

    /// Kernel profile `sech(x - σref)`.
    pub fn kernel(&self) -> &ScalarField {
        &self.kernel
    }

    /// `r1 = v·M1`, `r2 = v·M2`; refuses states with `v·M0 <= 0` anywhere.
    pub fn to_frame(&self, v: &VectorField3) -> Result<FrameCoordinates> {
        if v.values.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let mut r1 = Vec::with_capacity(n);
        let mut r2 = Vec::with_capacity(n);
        for (i, &u) in v.values.iter().enumerate() {
            let d = dot3(u, self.m0[i]);
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::RegimeViolation { node: i, dot: d });
            }
            r1.push(dot3(u, self.m1[i]));
            r2.push(dot3(u, self.m2));
        }
        Ok(FieldPair {
            first: ScalarField { grid: Arc::clone(&self.grid), values: r1 },
            second: ScalarField { grid: Arc::clone(&self.grid), values: r2 },
        })
    }

    /// `r1 M1 + r2 M2 + sqrt(1 - r1² - r2²) M0`.
    pub fn from_frame(&self, r: &FrameCoordinates) -> Result<VectorField3> {
        if r.first.values.len() != self.grid.len() || r.second.values.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let mut values = Vec::with_capacity(self.grid.len());
        for (i, (&a, &b)) in r.first.values.iter().zip(&r.second.values).enumerate() {
            let rho2 = a * a + b * b;
            if rho2 >= 1.0 || !rho2.is_finite() {
                return Err(Error::FrameDomain { node: i, radius2: rho2 });
            }
            let c = (1.0 - rho2).sqrt();
            let (m0, m1, m2) = (self.m0[i], self.m1[i], self.m2);
            values.push(std::array::from_fn(|k| a * m1[k] + b * m2[k] + c * m0[k]));
        }
        Ok(VectorField3 { grid: Arc::clone(&self.grid), values })
    }

    /// Mobile-frame coordinates `R_Λ` of the family member `Λ` (relative to
    /// the chart's reference wall).
    pub fn family_coordinates(&self, lambda: CollectiveCoordinates) -> FrameCoordinates {
        let (a, b): (Vec<f64>, Vec<f64>) = self
            .y
            .iter()
            .map(|&y| {
                let v = family_jet(lambda, y).value;
                (v[0], v[1])
            })
            .unzip();
        FieldPair {
            first: ScalarField { grid: Arc::clone(&self.grid), values: a },
            second: ScalarField { grid: Arc::clone(&self.grid), values: b },
        }
    }

    /// `(<r - R_Λ, v1>, <r - R_Λ, v2>)` and its Jacobian in `(θ, σ)`.
    fn orthogonality_system(&self, r: &FrameCoordinates, lambda: CollectiveCoordinates) -> ([f64; 2], [[f64; 2]; 2]) {
        let g = &self.grid;
        let mut f = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for (i, &y) in self.y.iter().enumerate() {
            let w = g.weight(i) * self.kernel.values[i];
            if w == 0.0 {
                continue;
            }
            let jet = family_jet(lambda, y);
            f[0] += w * (r.second.values[i] - jet.value[1]);
            f[1] += w * (r.first.values[i] - jet.value[0]);
            jac[0][0] -= w * jet.d_theta[1];
            jac[0][1] -= w * jet.d_sigma[1];
            jac[1][0] -= w * jet.d_theta[0];
            jac[1][1] -= w * jet.d_sigma[0];
        }
        (f, jac)
    }

    /// Newton initial guess: the sech-weighted average of `r2` for θ, the
    /// zero crossing of the reconstructed axial component for σ.
    fn initial_guess(&self, r: &FrameCoordinates) -> CollectiveCoordinates {
        let s = &self.kernel.values;
        let theta = -weighted_dot(&self.grid, &r.second.values, s) / self.kernel_norm2;
        let linear_sigma = -weighted_dot(&self.grid, &r.first.values, s) / self.kernel_norm2;
        let sigma = self
            .from_frame(r)
            .ok()
            .and_then(|u| zero_crossing(&self.y, &u.component(0).values))
            .unwrap_or(linear_sigma);
        CollectiveCoordinates { theta, sigma }
    }

    /// Splits `r = R_Λ + W` with `W` orthogonal to both kernel modes.
    pub fn decompose(&self, r: &FrameCoordinates) -> Result<WallDecomposition> {
        let size = r.norm(NormKind::H1);
        if !(size <= self.radius) {
            return Err(Error::OutsideChart { norm: size, radius: self.radius });
        }
        let mut lambda = self.initial_guess(r);
        let (mut f, mut jac) = self.orthogonality_system(r, lambda);
        let mut residual = max_abs2(f);
        let mut iterations = 0;
        while residual > RESIDUAL_TOL {
            if iterations == self.max_iterations {
                return Err(Error::NoConvergence { iterations, residual });
            }
            iterations += 1;
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                return Err(Error::NoConvergence { iterations, residual });
            }
            let d_theta = (jac[1][1] * f[0] - jac[0][1] * f[1]) / det;
            let d_sigma = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial = CollectiveCoordinates {
                    theta: lambda.theta - scale * d_theta,
                    sigma: lambda.sigma - scale * d_sigma,
                };
                let (tf, tj) = self.orthogonality_system(r, trial);
                if max_abs2(tf) < residual || scale * d_theta.hypot(d_sigma) <= STEP_TOL {
                    accepted = Some((trial, tf, tj));
                    break;
                }
                scale *= 0.5;
            }
            let Some((trial, tf, tj)) = accepted else {
                return Err(Error::NoConvergence { iterations, residual });
            };
            let step = scale * d_theta.hypot(d_sigma);
            lambda = trial;
            f = tf;
            jac = tj;
            residual = max_abs2(f);
            if step <= STEP_TOL {
                break;
            }
        }
        let w = r.sub(&self.family_coordinates(lambda))?;
        let residuals = (
            weighted_dot(&self.grid, &w.second.values, &self.kernel.values),
            weighted_dot(&self.grid, &w.first.values, &self.kernel.values),
        );
        Ok(WallDecomposition { lambda, w, residuals, iterations })
    }

    /// `R_Λ + W`.
    pub fn reconstruct(&self, d: &WallDecomposition) -> Result<FrameCoordinates> {
        self.family_coordinates(d.lambda).add(&d.w)
    }

    /// State to `(Λ, W)` in one call.
    pub fn decompose_state(&self, v: &VectorField3) -> Result<WallDecomposition> {
        self.decompose(&self.to_frame(v)?)
    }
}

fn max_abs2(f: [f64; 2]) -> f64 {
    f[0].abs().max(f[1].abs())
}

/// Linearly interpolated sign change of `u` closest to `y = 0`.
pub(crate) fn zero_crossing(y: &[f64], u: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..u.len() - 1 {
        let (a, b) = (u[i], u[i + 1]);
        if a == 0.0 {
            if best.is_none_or(|s| y[i].abs() < s.abs()) {
                best = Some(y[i]);
            }
        } else if a * b < 0.0 {
            let z = y[i] + (y[i + 1] - y[i]) * a / (a - b);
            if best.is_none_or(|s| z.abs() < s.abs()) {
                best = Some(z);
            }
        }
    }
    best
}

pub fn to_frame(v: &VectorField3) -> Result<FrameCoordinates> {
    WallChart::new(&v.grid).to_frame(v)
}

pub fn from_frame(r: &FrameCoordinates) -> Result<VectorField3> {
    WallChart::new(r.grid()).from_frame(r)
}

pub fn family_coordinates(lambda: CollectiveCoordinates, grid: &Arc<Grid>) -> FrameCoordinates {
    WallChart::new(grid).family_coordinates(lambda)
}

pub fn decompose(r: &FrameCoordinates) -> Result<WallDecomposition> {
    WallChart::new(r.grid()).decompose(r)
}

pub fn reconstruct(d: &WallDecomposition) -> Result<FrameCoordinates> {
    WallChart::new(d.w.grid()).reconstruct(d)
}
