//! Landau–Lifschitz evolution of the wire magnetization, in the laboratory
//! frame and in the frame co-moving with the traveling wall.
//!
//! Time stepping is the explicit midpoint rule followed by node-wise
//! projection back onto the unit sphere. Boundary nodes are either held at
//! their initial values or evolved with a mirrored ghost node.

use std::ops::ControlFlow;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{cross3, diff2, dot3, Grid, VectorField3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Lab,
    Moving,
}

impl FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lab" => Ok(Frame::Lab),
            "moving" => Ok(Frame::Moving),
            other => Err(Error::Config(format!("unknown frame `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// End nodes keep their initial values.
    ClampToProfile,
    /// Zero-flux ends via a mirrored ghost node.
    HomogeneousNeumann,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp-to-profile" | "clamp" => Ok(Boundary::ClampToProfile),
            "homogeneous-neumann" | "neumann" => Ok(Boundary::HomogeneousNeumann),
            other => Err(Error::Config(format!("unknown boundary policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsSpec {
    pub frame: Frame,
    pub delta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub record_every: usize,
}

impl DynamicsSpec {
    /// Largest admissible step for the explicit scheme on spacing `h`.
    pub fn dt_max(h: f64) -> f64 {
        0.2 * h * h
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("delta must be finite".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        let bound = Self::dt_max(grid.spacing());
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} exceeds the stability bound {bound:.3e} for h = {}",
                self.dt,
                grid.spacing()
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Recorded evolution: strided snapshots plus the terminal state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<VectorField3>,
    pub terminal: VectorField3,
}

/// `d²u/dx² - u2 e2 - u3 e3 + delta e1`, component-wise second differences.
pub fn effective_field(u: &VectorField3, delta: f64) -> VectorField3 {
    let lap: Vec<_> = (0..3).map(|k| diff2(&u.component(k))).collect();
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| [lap[0].values[i] + delta, lap[1].values[i] - v[1], lap[2].values[i] - v[2]])
        .collect();
    VectorField3 { grid: Arc::clone(&u.grid), values }
}

/// Laboratory-frame right-hand side `-u×h - u×(u×h)`. End rows are zero,
/// matching the clamped boundary policy.
pub fn rhs_lab(u: &VectorField3, delta: f64) -> VectorField3 {
    let mut out = vec![[0.0; 3]; u.values.len()];
    rhs_into(Frame::Lab, delta, Boundary::ClampToProfile, u.grid.spacing(), &u.values, &mut out);
    VectorField3 { grid: Arc::clone(&u.grid), values: out }
}

/// Co-moving right-hand side `-v×h - v×(v×h) - delta(dv/dx + v1 v - e1)`
/// with the applied field removed from `h`. End rows are zero.
pub fn rhs_moving(v: &VectorField3, delta: f64) -> VectorField3 {
    let mut out = vec![[0.0; 3]; v.values.len()];
    rhs_into(Frame::Moving, delta, Boundary::ClampToProfile, v.grid.spacing(), &v.values, &mut out);
    VectorField3 { grid: Arc::clone(&v.grid), values: out }
}

#[inline(always)]
fn node_rhs(frame: Frame, delta: f64, u: [f64; 3], lap: [f64; 3], dx: [f64; 3]) -> [f64; 3] {
    let field_delta = if frame == Frame::Lab { delta } else { 0.0 };
    let h = [lap[0] + field_delta, lap[1] - u[1], lap[2] - u[2]];
    let uxh = cross3(u, h);
    // u×(u×h) = u (u·h) - h |u|²
    let uh = dot3(u, h);
    let uu = dot3(u, u);
    let mut r = [
        -uxh[0] - (u[0] * uh - h[0] * uu),
        -uxh[1] - (u[1] * uh - h[1] * uu),
        -uxh[2] - (u[2] * uh - h[2] * uu),
    ];
    if frame == Frame::Moving {
        // advection taken in the tangent plane; |v| = 1 makes v·dv/dx vanish
        // in the continuum but not for centered differences
        let p = dot3(u, dx) / uu;
        r[0] -= delta * (dx[0] - p * u[0] + u[0] * u[0] - 1.0);
        r[1] -= delta * (dx[1] - p * u[1] + u[0] * u[1]);
        r[2] -= delta * (dx[2] - p * u[2] + u[0] * u[2]);
    }
    r
}

fn rhs_into(frame: Frame, delta: f64, boundary: Boundary, h: f64, u: &[[f64; 3]], out: &mut [[f64; 3]]) {
    let n = u.len();
    let ih2 = 1.0 / (h * h);
    let i2h = 0.5 / h;
    for i in 1..n - 1 {
        let (a, b, c) = (u[i - 1], u[i], u[i + 1]);
        let lap = [
            (a[0] - 2.0 * b[0] + c[0]) * ih2,
            (a[1] - 2.0 * b[1] + c[1]) * ih2,
            (a[2] - 2.0 * b[2] + c[2]) * ih2,
        ];
        let dx = [(c[0] - a[0]) * i2h, (c[1] - a[1]) * i2h, (c[2] - a[2]) * i2h];
        out[i] = node_rhs(frame, delta, b, lap, dx);
    }
    match boundary {
        Boundary::ClampToProfile => {
            out[0] = [0.0; 3];
            out[n - 1] = [0.0; 3];
        }
        Boundary::HomogeneousNeumann => {
            for (i, j) in [(0, 1), (n - 1, n - 2)] {
                let (b, c) = (u[i], u[j]);
                let lap = [
                    2.0 * (c[0] - b[0]) * ih2,
                    2.0 * (c[1] - b[1]) * ih2,
                    2.0 * (c[2] - b[2]) * ih2,
                ];
                out[i] = node_rhs(frame, delta, b, lap, [0.0; 3]);
            }
        }
    }
}

/// Reusable workspace for the midpoint-projection scheme.
pub struct Integrator {
    spec: DynamicsSpec,
    h: f64,
    k1: Vec<[f64; 3]>,
    mid: Vec<[f64; 3]>,
    k2: Vec<[f64; 3]>,
}

impl Integrator {
    pub fn new(grid: &Grid, spec: DynamicsSpec) -> Result<Self> {
        spec.validate(grid)?;
        let n = grid.len();
        Ok(Integrator { spec, h: grid.spacing(), k1: vec![[0.0; 3]; n], mid: vec![[0.0; 3]; n], k2: vec![[0.0; 3]; n] })
    }

    pub fn spec(&self) -> &DynamicsSpec {
        &self.spec
    }

    /// Advances `u` by one step in place. `index` only labels errors.
    pub fn advance(&mut self, u: &mut [[f64; 3]], index: usize) -> Result<()> {
        let DynamicsSpec { frame, delta, dt, boundary, .. } = self.spec;
        rhs_into(frame, delta, boundary, self.h, u, &mut self.k1);
        for ((m, x), k) in self.mid.iter_mut().zip(u.iter()).zip(&self.k1) {
            *m = [x[0] + 0.5 * dt * k[0], x[1] + 0.5 * dt * k[1], x[2] + 0.5 * dt * k[2]];
        }
        rhs_into(frame, delta, boundary, self.h, &self.mid, &mut self.k2);
        let mut finite = true;
        for (x, k) in u.iter_mut().zip(&self.k2) {
            let y = [x[0] + dt * k[0], x[1] + dt * k[1], x[2] + dt * k[2]];
            let r = dot3(y, y).sqrt();
            finite &= r.is_finite() && r > 0.0;
            *x = [y[0] / r, y[1] / r, y[2] / r];
        }
        if !finite {
            return Err(Error::Diverged { step: index });
        }
        Ok(())
    }
}

/// One integration step from `state`.
pub fn step(state: &VectorField3, spec: &DynamicsSpec) -> Result<VectorField3> {
    let mut integrator = Integrator::new(&state.grid, *spec)?;
    let mut next = state.clone();
    integrator.advance(&mut next.values, 0)?;
    Ok(next)
}

/// Integrates to `t_end`, handing every `record_every`-th state (and the
/// initial and final ones) to `observer`. The observer may stop the run
/// early; the returned value is the last state reached.
pub fn evolve_with<F>(initial: &VectorField3, spec: &DynamicsSpec, mut observer: F) -> Result<VectorField3>
where
    F: FnMut(usize, f64, &VectorField3) -> ControlFlow<()>,
{
    let mut integrator = Integrator::new(&initial.grid, *spec)?;
    let mut state = initial.clone();
    let steps = spec.steps();
    if observer(0, 0.0, &state).is_break() {
        return Ok(state);
    }
    for k in 1..=steps {
        integrator.advance(&mut state.values, k)?;
        if (k % spec.record_every == 0 || k == steps) && observer(k, k as f64 * spec.dt, &state).is_break() {
            break;
        }
    }
    Ok(state)
}

pub fn evolve(initial: &VectorField3, spec: &DynamicsSpec) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let terminal = evolve_with(initial, spec, |_, t, u| {
        times.push(t);
        snapshots.push(u.clone());
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory { times, snapshots, terminal })
}

/// Exchange + anisotropy + Zeeman energy. The Zeeman integrand is taken
/// relative to the `tanh` tail so it stays finite on the truncated line;
/// only differences of this quantity are meaningful when `delta != 0`.
pub fn energy(u: &VectorField3, delta: f64) -> f64 {
    let g = &u.grid;
    let h = g.spacing();
    let v = &u.values;
    let exchange: f64 = v
        .windows(2)
        .map(|w| {
            let d = [w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]];
            dot3(d, d)
        })
        .sum::<f64>()
        / h;
    let mut anisotropy = 0.0;
    let mut zeeman = 0.0;
    for (i, (x, w)) in g.nodes().iter().zip(v).enumerate() {
        let wt = g.weight(i);
        anisotropy += wt * (w[1] * w[1] + w[2] * w[2]);
        zeeman += wt * (w[0] - x.tanh());
    }
    0.5 * exchange + 0.5 * anisotropy - delta * zeeman
}
