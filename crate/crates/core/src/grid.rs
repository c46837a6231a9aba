//! Uniform-grid calculus on a truncated line: fields, finite differences,
//! trapezoidal inner products and Sobolev norms.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform mesh on `[-x_max, x_max]` with an odd number of nodes, so that
/// `x = 0` is always a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_max: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(x_max: f64, n: usize) -> Result<Arc<Grid>> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::Config(format!("x_max must be positive, got {x_max}")));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::Config(format!("node count must be odd and >= 3, got {n}")));
        }
        let h = 2.0 * x_max / (n - 1) as f64;
        let c = (n - 1) / 2;
        let mut nodes: Vec<f64> = (0..n).map(|i| (i as f64 - c as f64) * h).collect();
        nodes[0] = -x_max;
        nodes[n - 1] = x_max;
        Ok(Arc::new(Grid { x_max, n, h, nodes }))
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Trapezoidal quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Grid with the same extent and half the spacing (`n -> 2n - 1`).
    pub fn refined(&self) -> Arc<Grid> {
        Grid::new(self.x_max, 2 * self.n - 1).expect("refinement of a valid grid is valid")
    }

    pub fn sample(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: Arc::clone(self),
            values: self.nodes.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sample3(self: &Arc<Self>, f: impl Fn(f64) -> [f64; 3]) -> VectorField3 {
        VectorField3 {
            grid: Arc::clone(self),
            values: self.nodes.iter().map(|&x| f(x)).collect(),
        }
    }

    pub(crate) fn same_as(self: &Arc<Self>, other: &Arc<Grid>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// `make_grid` under its functional name.
pub fn make_grid(x_max: f64, n: usize) -> Result<Arc<Grid>> {
    Grid::new(x_max, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField { grid: Arc::clone(grid), values: vec![0.0; grid.len()] }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sphere-valued (or arbitrary) three-component field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    pub grid: Arc<Grid>,
    pub values: Vec<[f64; 3]>,
}

impl VectorField3 {
    pub fn new(grid: Arc<Grid>, values: Vec<[f64; 3]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField3 { grid, values })
    }

    pub fn uniform(grid: &Arc<Grid>, v: [f64; 3]) -> Self {
        VectorField3 { grid: Arc::clone(grid), values: vec![v; grid.len()] }
    }

    pub fn component(&self, k: usize) -> ScalarField {
        ScalarField { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| v[k]).collect() }
    }

    pub fn from_components(c: [&ScalarField; 3]) -> Result<Self> {
        let grid = &c[0].grid;
        if !grid.same_as(&c[1].grid) || !grid.same_as(&c[2].grid) {
            return Err(Error::GridMismatch);
        }
        let values = (0..grid.len()).map(|i| [c[0].values[i], c[1].values[i], c[2].values[i]]).collect();
        Ok(VectorField3 { grid: Arc::clone(grid), values })
    }

    pub fn sub(&self, other: &VectorField3) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| sub3(*a, *b)).collect();
        Ok(VectorField3 { grid: Arc::clone(&self.grid), values })
    }

    /// Largest node-wise deviation of `|u|` from one.
    pub fn max_unit_defect(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((norm3(*v) - 1.0).abs()))
    }
}

/// Two real fields on the same grid: mobile-frame coordinates, the residual
/// `W`, kernel modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub first: ScalarField,
    pub second: ScalarField,
}

impl FieldPair {
    pub fn new(first: ScalarField, second: ScalarField) -> Result<Self> {
        if !first.grid.same_as(&second.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(FieldPair { first, second })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        FieldPair { first: ScalarField::zeros(grid), second: ScalarField::zeros(grid) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.first.grid
    }

    pub fn add(&self, other: &FieldPair) -> Result<Self> {
        FieldPair::new(
            self.first.zip_with(&other.first, |a, b| a + b)?,
            self.second.zip_with(&other.second, |a, b| a + b)?,
        )
    }

    pub fn sub(&self, other: &FieldPair) -> Result<Self> {
        FieldPair::new(
            self.first.zip_with(&other.first, |a, b| a - b)?,
            self.second.zip_with(&other.second, |a, b| a - b)?,
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        FieldPair { first: self.first.scaled(s), second: self.second.scaled(s) }
    }

    /// Component-summed L² inner product.
    pub fn inner(&self, other: &FieldPair) -> Result<f64> {
        Ok(inner_l2(&self.first, &other.first)? + inner_l2(&self.second, &other.second)?)
    }
}

#[inline]
pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// First derivative: centered in the interior, one-sided second order at
/// the two ends.
pub fn diff1(f: &ScalarField) -> ScalarField {
    let v = &f.values;
    let n = v.len();
    let h = f.grid.spacing();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    ScalarField { grid: Arc::clone(&f.grid), values: out }
}

/// Second derivative: three-point stencil in the interior. The end rows use
/// a one-sided four-point stencil (three-point when only three nodes exist);
/// dynamical code overrides them with its own boundary policy.
pub fn diff2(f: &ScalarField) -> ScalarField {
    let v = &f.values;
    let n = v.len();
    let h2 = f.grid.spacing().powi(2);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
        out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
    ScalarField { grid: Arc::clone(&f.grid), values: out }
}

/// Trapezoidal L² inner product over the truncated line.
pub fn inner_l2(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(weighted_dot(&f.grid, &f.values, &g.values))
}

pub(crate) fn weighted_dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let interior: f64 = a[1..n - 1].iter().zip(&b[1..n - 1]).map(|(x, y)| x * y).sum();
    grid.spacing() * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H2,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L2" => Ok(NormKind::L2),
            "H1" => Ok(NormKind::H1),
            "H2" => Ok(NormKind::H2),
            other => Err(Error::Config(format!("unknown norm kind `{other}`"))),
        }
    }
}

/// Squared Sobolev norm of one scalar component. The gradient term uses
/// forward differences, which is the seminorm the discrete exchange energy
/// is built on.
fn norm_sq(f: &ScalarField, kind: NormKind) -> f64 {
    let g = &f.grid;
    let mut s = weighted_dot(g, &f.values, &f.values);
    if matches!(kind, NormKind::H1 | NormKind::H2) {
        // gradient part on cell midpoints (forward differences)
        s += f.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / g.spacing();
    }
    if kind == NormKind::H2 {
        let d = diff2(f);
        s += weighted_dot(g, &d.values, &d.values);
    }
    s
}

/// Sobolev norms; multi-component fields sum component squares before the
/// square root.
pub trait Sobolev {
    fn norm_squared(&self, kind: NormKind) -> f64;

    fn norm(&self, kind: NormKind) -> f64 {
        self.norm_squared(kind).sqrt()
    }
}

impl Sobolev for ScalarField {
    fn norm_squared(&self, kind: NormKind) -> f64 {
        norm_sq(self, kind)
    }
}

impl Sobolev for FieldPair {
    fn norm_squared(&self, kind: NormKind) -> f64 {
        norm_sq(&self.first, kind) + norm_sq(&self.second, kind)
    }
}

impl Sobolev for VectorField3 {
    fn norm_squared(&self, kind: NormKind) -> f64 {
        (0..3).map(|k| norm_sq(&self.component(k), kind)).sum()
    }
}

pub fn norm<F: Sobolev + ?Sized>(f: &F, kind: NormKind) -> f64 {
    f.norm(kind)
}
