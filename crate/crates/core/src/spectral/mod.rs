//! Discrete linear operators around the wall and their spectra.
//!
//! Operators are stored as banded blocks acting on full node vectors. Every
//! eigenproblem is posed on the interior nodes (Dirichlet truncation). The
//! two-component operators built here all have the block form
//! `[[P, -Q], [Q, P]]`, which is the real form of the complex scalar operator
//! `P + iQ` acting on `z = W1 + i W2`; their spectra are computed from that
//! complex tridiagonal and its conjugate. A dense route is kept for operators
//! without that structure and as a cross-check.

pub mod tridiag;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FieldPair, Grid, NormKind, ScalarField, Sobolev};
use crate::profiles::{kernel_modes, KernelModes};
use tridiag::{cnorm, ql_eigenvalues, real_dot, ComplexTridiagonal};

/// Square band matrix; entry `(i, j)` is stored when `-lower <= j - i <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Banded { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize;
        if off < -(self.lower as isize) || off > self.upper as isize || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (self.lower + self.upper + 1) + (off + self.lower as isize) as usize)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] = v;
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Banded {
        let mut t = Banded::zeros(self.n, self.upper, self.lower);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Banded) -> Banded {
        let mut p = Banded::zeros(self.n, self.lower + other.lower, self.upper + other.upper);
        for i in 0..self.n {
            for k in self.row_range(i) {
                let a = self.get(i, k);
                for j in other.row_range(k) {
                    let k2 = p.slot(i, j).expect("product band");
                    p.data[k2] += a * other.get(k, j);
                }
            }
        }
        p
    }

    /// `a * self + b * other` on the union of the two bands.
    pub fn combine(&self, a: f64, other: &Banded, b: f64) -> Banded {
        let mut s = Banded::zeros(self.n, self.lower.max(other.lower), self.upper.max(other.upper));
        for i in 0..self.n {
            for j in s.row_range(i) {
                let v = a * self.get(i, j) + b * other.get(i, j);
                s.set(i, j, v);
            }
        }
        s
    }

    pub fn scaled(&self, a: f64) -> Banded {
        Banded { data: self.data.iter().map(|v| a * v).collect(), ..self.clone() }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in self.row_range(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Real block operator on stacked node vectors (`components` blocks of `n`).
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    components: usize,
    blocks: Vec<Banded>,
    tag: String,
}

impl DiscreteOperator {
    pub fn scalar(grid: &Arc<Grid>, block: Banded, tag: impl Into<String>) -> Self {
        DiscreteOperator { grid: Arc::clone(grid), components: 1, blocks: vec![block], tag: tag.into() }
    }

    /// Two-component operator from row-major blocks `[[a, b], [c, d]]`.
    pub fn pair(grid: &Arc<Grid>, blocks: [Banded; 4], tag: impl Into<String>) -> Self {
        DiscreteOperator { grid: Arc::clone(grid), components: 2, blocks: blocks.into(), tag: tag.into() }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn size(&self) -> usize {
        self.components * self.grid.len()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn block(&self, row: usize, col: usize) -> &Banded {
        &self.blocks[row * self.components + col]
    }

    /// Applies the operator to a stacked vector of length `size()`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        assert_eq!(x.len(), self.size(), "operand length");
        let mut y = vec![0.0; self.size()];
        for r in 0..self.components {
            for c in 0..self.components {
                let part = self.block(r, c).apply(&x[c * n..(c + 1) * n]);
                for (yi, pi) in y[r * n..(r + 1) * n].iter_mut().zip(part) {
                    *yi += pi;
                }
            }
        }
        y
    }

    pub fn apply_scalar(&self, f: &ScalarField) -> Result<ScalarField> {
        if self.components != 1 {
            return Err(Error::Config(format!("operator `{}` acts on pairs", self.tag)));
        }
        if !f.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        ScalarField::new(Arc::clone(&self.grid), self.apply(&f.values))
    }

    pub fn apply_pair(&self, w: &FieldPair) -> Result<FieldPair> {
        if self.components != 2 {
            return Err(Error::Config(format!("operator `{}` acts on scalars", self.tag)));
        }
        if !w.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let stacked: Vec<f64> = w.first.values.iter().chain(&w.second.values).copied().collect();
        let y = self.apply(&stacked);
        FieldPair::new(
            ScalarField::new(Arc::clone(&self.grid), y[..n].to_vec())?,
            ScalarField::new(Arc::clone(&self.grid), y[n..].to_vec())?,
        )
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.components {
            for c in 0..self.components {
                let (a, b) = (self.block(r, c), self.block(c, r));
                for i in 0..a.len() {
                    for j in a.row_range(i) {
                        worst = worst.max((a.get(i, j) - b.get(j, i)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        DMatrix::from_fn(self.size(), self.size(), |i, j| self.block(i / n, j / n).get(i % n, j % n))
    }

    /// The operator restricted to interior nodes of every component.
    pub fn interior_dense(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let m = n - 2;
        DMatrix::from_fn(self.components * m, self.components * m, |i, j| {
            self.block(i / m, j / m).get(i % m + 1, j % m + 1)
        })
    }

    /// The complex scalar form `P + iQ` on interior nodes, when the operator
    /// has the rotation-commuting block structure and is tridiagonal there.
    pub fn complex_interior(&self) -> Option<ComplexTridiagonal> {
        let (p, q) = match self.components {
            1 => (&self.blocks[0], None),
            2 => {
                let minus_b = self.blocks[1].scaled(-1.0);
                let same = |a: &Banded, b: &Banded| {
                    (0..a.len()).all(|i| {
                        let lo = i.saturating_sub(a.lower.max(b.lower));
                        let hi = (i + a.upper.max(b.upper) + 1).min(a.len());
                        (lo..hi).all(|j| a.get(i, j) == b.get(i, j))
                    })
                };
                if !same(&self.blocks[0], &self.blocks[3]) || !same(&minus_b, &self.blocks[2]) {
                    return None;
                }
                (&self.blocks[0], Some(&self.blocks[2]))
            }
            _ => return None,
        };
        let n = self.grid.len();
        let m = n - 2;
        let entry = |i: usize, j: usize| Complex64::new(p.get(i, j), q.map_or(0.0, |q| q.get(i, j)));
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                if i.abs_diff(j) > 1 && entry(i, j) != Complex64::new(0.0, 0.0) {
                    return None;
                }
            }
        }
        Some(ComplexTridiagonal {
            sub: (0..m - 1).map(|i| entry(i + 2, i + 1)).collect(),
            diag: (0..m).map(|i| entry(i + 1, i + 1)).collect(),
            sup: (0..m - 1).map(|i| entry(i + 1, i + 2)).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorBoundary {
    /// Zero boundary rows and no coupling into the boundary columns.
    #[default]
    Dirichlet,
}

/// How the Schrödinger potential is evaluated on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PotentialStencil {
    /// Point samples of `2 tanh² x - 1`.
    Sampled,
    /// The potential for which the sampled `sech` is an exact null vector of
    /// the three-point operator; differs from the samples by `O(h²)` and keeps
    /// the discrete operator nonnegative.
    #[default]
    KernelConsistent,
}

pub fn potential(grid: &Grid, stencil: PotentialStencil) -> Vec<f64> {
    let h = grid.spacing();
    grid.nodes()
        .iter()
        .map(|&x| match stencil {
            PotentialStencil::Sampled => 2.0 * x.tanh().powi(2) - 1.0,
            PotentialStencil::KernelConsistent => {
                // (sech(x+h) - 2 sech x + sech(x-h)) / (h² sech x) in cancellation-free form
                let a = h.cosh();
                let b = x.tanh() * h.sinh();
                let sh = (0.5 * h).sinh();
                2.0 * (b * b - 2.0 * a * sh * sh) / ((a * a - b * b) * h * h)
            }
        })
        .collect()
}

/// `L = -d²/dx² + 2 tanh² x - 1` with Dirichlet truncation.
pub fn build_schrodinger(grid: &Arc<Grid>, boundary: OperatorBoundary, stencil: PotentialStencil) -> DiscreteOperator {
    let OperatorBoundary::Dirichlet = boundary;
    let n = grid.len();
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    let v = potential(grid, stencil);
    let mut b = Banded::zeros(n, 1, 1);
    for i in 1..n - 1 {
        b.set(i, i, 2.0 * inv_h2 + v[i]);
        if i > 1 {
            b.set(i, i - 1, -inv_h2);
        }
        if i < n - 2 {
            b.set(i, i + 1, -inv_h2);
        }
    }
    DiscreteOperator::scalar(grid, b, "L")
}

/// `l = d/dx + tanh x`, centered inside with one-sided end rows.
pub fn build_factor(grid: &Arc<Grid>) -> DiscreteOperator {
    let n = grid.len();
    let h = grid.spacing();
    let mut b = Banded::zeros(n, 2, 2);
    for (i, &x) in grid.nodes().iter().enumerate() {
        b.set(i, i, x.tanh());
    }
    for i in 1..n - 1 {
        b.set(i, i + 1, 0.5 / h);
        b.set(i, i - 1, -0.5 / h);
    }
    let (a, z) = (0, n - 1);
    b.set(a, a, b.get(a, a) - 1.5 / h);
    b.set(a, a + 1, 2.0 / h);
    b.set(a, a + 2, -0.5 / h);
    b.set(z, z, b.get(z, z) + 1.5 / h);
    b.set(z, z - 1, -2.0 / h);
    b.set(z, z - 2, 0.5 / h);
    DiscreteOperator::scalar(grid, b, "l")
}

/// `J ⊗ L` with `J = [[-1, -1], [1, -1]]`.
pub fn build_linearized(grid: &Arc<Grid>) -> DiscreteOperator {
    build_drifted(grid, 0.0)
}

/// `J ⊗ L + delta (I ⊗ l)`, the linearization in the moving frame.
pub fn build_drifted(grid: &Arc<Grid>, delta: f64) -> DiscreteOperator {
    let l = build_schrodinger(grid, OperatorBoundary::Dirichlet, PotentialStencil::KernelConsistent).blocks.remove(0);
    let d = build_factor(grid).blocks.remove(0);
    let diag = l.combine(-1.0, &d, delta);
    let tag = if delta == 0.0 { "JL".to_string() } else { format!("JL+{delta}l") };
    DiscreteOperator::pair(grid, [diag.clone(), l.scaled(-1.0), l, diag], tag)
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: Complex64,
    /// Stacked full-grid components, zero on the boundary nodes, unit
    /// Euclidean norm.
    pub vector: Vec<Complex64>,
    pub kernel_overlap: f64,
}

impl Eigenpair {
    /// Real representative `(Re z, Im z)` for a two-component eigenvector of
    /// the form `(z, -iz)`; for scalar operators the real part.
    pub fn real_field(&self, grid: &Arc<Grid>) -> Result<FieldPair> {
        let n = grid.len();
        if self.vector.len() == n {
            let f = ScalarField::new(Arc::clone(grid), self.vector.iter().map(|z| z.re).collect())?;
            return FieldPair::new(f, ScalarField::zeros(grid));
        }
        FieldPair::new(
            ScalarField::new(Arc::clone(grid), self.vector[..n].iter().map(|z| z.re).collect())?,
            ScalarField::new(Arc::clone(grid), self.vector[n..].iter().map(|z| z.re).collect())?,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Eigenvalues of the restriction, sorted by real part descending.
    pub eigenvalues: Vec<Complex64>,
    /// Largest normalized overlap of each eigenvector with the deflated modes.
    pub kernel_overlaps: Vec<f64>,
    /// The leading eigenpairs, in the order of `eigenvalues`.
    pub eigenpairs: Vec<Eigenpair>,
    /// Largest real part on the restricted space.
    pub abscissa: f64,
    /// `||op v||_{L2}` for each deflated mode.
    pub deflation_residuals: Vec<f64>,
}

/// Number of leading eigenpairs kept with their vectors.
pub const KEPT_EIGENPAIRS: usize = 6;

fn sort_descending(v: &mut [(Complex64, f64)]) {
    v.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
}

/// Deflation vector on interior nodes and the complex form of `op`.
struct Reduced {
    a: ComplexTridiagonal,
    q: Vec<f64>,
    components: usize,
}

fn reduce(op: &DiscreteOperator, modes: &KernelModes) -> Result<Option<Reduced>> {
    let Some(a) = op.complex_interior() else { return Ok(None) };
    let n = op.grid.len();
    let s = modes.profile();
    if !s.grid.same_as(&op.grid) {
        return Err(Error::GridMismatch);
    }
    if op.components == 2
        && (modes.v1.second.values != s.values
            || modes.v1.first.max_abs() != 0.0
            || modes.v2.second.max_abs() != 0.0)
    {
        return Ok(None);
    }
    let q = s.values[1..n - 1].to_vec();
    let qq: f64 = q.iter().map(|v| v * v).sum();
    if !(qq.is_finite() && qq > 1e-24) {
        return Err(Error::IllConditioned(format!("deflation mode has squared norm {qq:.3e}")));
    }
    Ok(Some(Reduced { a, q, components: op.components }))
}

fn start_vector(m: usize) -> Vec<Complex64> {
    (0..m).map(|i| Complex64::new(1.0 + 0.5 * (0.7 * i as f64).sin(), 0.3 * (1.3 * i as f64).cos())).collect()
}

fn normalize(z: &mut [Complex64]) {
    let s = cnorm(z);
    if s > 0.0 {
        z.iter_mut().for_each(|v| *v /= s);
    }
}

/// Unrestricted eigenvector near `mu` by inverse iteration.
fn eigenvector(a: &ComplexTridiagonal, mu: Complex64) -> Vec<Complex64> {
    let lu = a.factor_shifted(mu);
    let mut z = start_vector(a.len());
    for _ in 0..3 {
        lu.solve(&mut z);
        normalize(&mut z);
    }
    z
}

/// Eigenpair of the restriction `Q A Q` on `q⊥` near `mu`: inverse
/// iteration on the bordered system, then Rayleigh-quotient refinement.
fn restricted_pair(a: &ComplexTridiagonal, q: &[f64], mu: Complex64) -> (Complex64, Vec<Complex64>) {
    let mut z = start_vector(a.len());
    let mut shift = mu;
    let mut lambda = mu;
    for round in 0..3 {
        let lu = a.factor_shifted(shift);
        let mut p: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        lu.solve(&mut p);
        let qp = real_dot(q, &p);
        for _ in 0..if round == 0 { 4 } else { 1 } {
            lu.solve(&mut z);
            if qp.norm() > 0.0 {
                let alpha = real_dot(q, &z) / qp;
                z.iter_mut().zip(&p).for_each(|(zi, pi)| *zi -= alpha * pi);
            } else {
                z.clone_from(&p);
            }
            normalize(&mut z);
        }
        let az = a.apply(&z);
        lambda = z.iter().zip(&az).map(|(u, v)| u.conj() * v).sum();
        // perturb the shift off the exact eigenvalue to keep the solve regular
        shift = lambda * (1.0 + 1e-13) + 1e-14;
    }
    (lambda, z)
}

fn overlap(q: &[f64], z: &[Complex64]) -> f64 {
    let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    real_dot(q, z).norm() / (qn * cnorm(z))
}

/// Drops the eigenvalue carrying the deflated direction and returns the rest.
fn without_kernel(red: &Reduced, mut values: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let qa = red.a.apply(&red.q.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    let rho = real_dot(&red.q, &qa) / red.q.iter().map(|v| v * v).sum::<f64>();
    values.sort_by(|x, y| (x - rho).norm().total_cmp(&(y - rho).norm()));
    let (best, ov) = values
        .iter()
        .take(3)
        .enumerate()
        .map(|(k, &mu)| (k, overlap(&red.q, &eigenvector(&red.a, mu))))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::Eigen("empty spectrum".into()))?;
    if ov < 0.5 {
        return Err(Error::Eigen(format!("no eigenvector aligned with the deflated mode (best overlap {ov:.3})")));
    }
    values.remove(best);
    Ok(values)
}

fn embed(red: &Reduced, n: usize, z: &[Complex64], conjugate: bool) -> Vec<Complex64> {
    let pad = |v: Vec<Complex64>| {
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[1..n - 1].copy_from_slice(&v);
        full
    };
    let z: Vec<Complex64> = if conjugate { z.iter().map(|c| c.conj()).collect() } else { z.to_vec() };
    if red.components == 1 {
        return pad(z);
    }
    let rot = if conjugate { Complex64::i() } else { -Complex64::i() };
    let second: Vec<Complex64> = z.iter().map(|c| rot * c).collect();
    let mut out = pad(z);
    out.extend(pad(second));
    let s = cnorm(&out);
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Eigenvalues of the interior operator (no deflation), sorted by real part
/// descending.
pub fn spectrum(op: &DiscreteOperator) -> Result<Vec<Complex64>> {
    let mut out = match op.complex_interior() {
        Some(a) => {
            let ev = a.eigenvalues()?;
            if op.components == 2 {
                ev.iter().flat_map(|&z| [z, z.conj()]).collect()
            } else {
                ev
            }
        }
        None => op.interior_dense().complex_eigenvalues().iter().copied().collect(),
    };
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

/// Eigenvalues of a symmetric scalar operator on interior nodes, ascending.
pub fn symmetric_spectrum(op: &DiscreteOperator) -> Result<Vec<f64>> {
    let asym = op.max_asymmetry();
    if op.components != 1 || asym > 1e-12 {
        return Err(Error::Eigen(format!("operator `{}` is not a symmetric scalar operator", op.tag)));
    }
    let b = &op.blocks[0];
    let n = op.grid.len();
    if b.lower > 1 || b.upper > 1 {
        let mut v: Vec<f64> = op.interior_dense().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        return Ok(v);
    }
    let diag: Vec<f64> = (1..n - 1).map(|i| b.get(i, i)).collect();
    let off: Vec<f64> = (1..n - 2).map(|i| b.get(i, i + 1)).collect();
    let mut v = ql_eigenvalues(&diag, &off)?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn deflation_residuals(op: &DiscreteOperator, modes: &KernelModes) -> Result<Vec<f64>> {
    if op.components == 1 {
        return Ok(vec![op.apply_scalar(modes.profile())?.norm(NormKind::L2)]);
    }
    Ok(vec![op.apply_pair(&modes.v1)?.norm(NormKind::L2), op.apply_pair(&modes.v2)?.norm(NormKind::L2)])
}

/// Spectrum of `op` restricted to the L²-orthogonal complement of the kernel
/// modes (only the `sech` profile for scalar operators).
pub fn restricted_spectrum(op: &DiscreteOperator, modes: &KernelModes) -> Result<SpectrumReport> {
    let residuals = deflation_residuals(op, modes)?;
    let Some(red) = reduce(op, modes)? else {
        let eigenvalues = restricted_spectrum_dense(op, modes)?;
        return Ok(SpectrumReport {
            abscissa: eigenvalues.first().map_or(f64::NEG_INFINITY, |z| z.re),
            kernel_overlaps: vec![f64::NAN; eigenvalues.len()],
            eigenvalues,
            eigenpairs: Vec::new(),
            deflation_residuals: residuals,
        });
    };
    let shifts = without_kernel(&red, red.a.eigenvalues()?)?;
    let n = op.grid.len();
    let scale = if red.components == 2 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    let mut pairs: Vec<(Complex64, f64, Complex64)> = shifts
        .iter()
        .map(|&mu| {
            let (lambda, z) = restricted_pair(&red.a, &red.q, mu);
            (lambda, scale * overlap(&red.q, &z), mu)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));

    let conjugates: &[bool] = if red.components == 2 { &[false, true] } else { &[false] };
    let mut listed: Vec<(Complex64, f64)> = Vec::new();
    let mut eigenpairs = Vec::new();
    for (k, &(lambda, ov, mu)) in pairs.iter().enumerate() {
        let z = (k < KEPT_EIGENPAIRS).then(|| restricted_pair(&red.a, &red.q, mu).1);
        for &c in conjugates {
            let value = if c { lambda.conj() } else { lambda };
            listed.push((value, ov));
            if let Some(z) = &z {
                eigenpairs.push(Eigenpair { value, vector: embed(&red, n, z, c), kernel_overlap: ov });
            }
        }
    }
    sort_descending(&mut listed);
    eigenpairs.sort_by(|a, b| b.value.re.total_cmp(&a.value.re).then(b.value.im.total_cmp(&a.value.im)));
    eigenpairs.truncate(KEPT_EIGENPAIRS);
    Ok(SpectrumReport {
        abscissa: listed.first().map_or(f64::NEG_INFINITY, |z| z.0.re),
        eigenvalues: listed.iter().map(|p| p.0).collect(),
        kernel_overlaps: listed.iter().map(|p| p.1).collect(),
        eigenpairs,
        deflation_residuals: residuals,
    })
}

/// Largest real part of the restricted spectrum; only the leading
/// eigenvalues are refined on the restricted space.
pub fn spectral_abscissa(op: &DiscreteOperator, modes: &KernelModes) -> Result<f64> {
    let Some(red) = reduce(op, modes)? else {
        return Ok(restricted_spectrum_dense(op, modes)?.first().map_or(f64::NEG_INFINITY, |z| z.re));
    };
    let mut shifts = without_kernel(&red, red.a.eigenvalues()?)?;
    shifts.sort_by(|a, b| b.re.total_cmp(&a.re));
    let refined = shifts.iter().take(4).map(|&mu| restricted_pair(&red.a, &red.q, mu).0.re);
    Ok(refined.chain(shifts.iter().skip(4).map(|z| z.re)).fold(f64::NEG_INFINITY, f64::max))
}

/// Dense restriction `Bᵀ A B` with `B` an orthonormal basis of the
/// complement of the deflated modes. Intended for small grids.
pub fn restricted_spectrum_dense(op: &DiscreteOperator, modes: &KernelModes) -> Result<Vec<Complex64>> {
    let n = op.grid.len();
    let m = n - 2;
    let size = op.components * m;
    let columns: Vec<Vec<f64>> = if op.components == 1 {
        vec![modes.profile().values[1..n - 1].to_vec()]
    } else {
        [&modes.v1, &modes.v2]
            .iter()
            .map(|v| v.first.values[1..n - 1].iter().chain(&v.second.values[1..n - 1]).copied().collect())
            .collect()
    };
    let k = columns.len();
    let kmat = DMatrix::from_fn(size, k, |i, j| columns[j][i]);
    let gram = kmat.transpose() * &kmat;
    let gev = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (gev.min(), gev.max());
    if !(lo > 1e-12 * hi && hi > 0.0) {
        return Err(Error::IllConditioned(format!("mode Gram matrix eigenvalues in [{lo:.3e}, {hi:.3e}]")));
    }
    let mut padded = DMatrix::<f64>::zeros(size, size + k);
    padded.columns_mut(0, k).copy_from(&kmat);
    padded.columns_mut(k, size).fill_with_identity();
    let basis = padded.qr().q();
    let b = basis.columns(k, size - k).into_owned();
    let restricted = b.transpose() * op.interior_dense() * &b;
    let mut ev: Vec<Complex64> = restricted.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

#[derive(Debug, Clone)]
pub struct Delta0Estimate {
    pub delta0: f64,
    /// Final bisection bracket `(below target, at or above target)`.
    pub bracket: (f64, f64),
    /// Every evaluated `(delta, abscissa)` in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

pub const DELTA0_TOLERANCE: f64 = 1e-3;

/// Bisection for the largest `delta` whose restricted abscissa of
/// `JL + delta l` stays below `target`.
pub fn estimate_delta0(grid: &Arc<Grid>, target: f64) -> Result<Delta0Estimate> {
    let modes = kernel_modes(grid);
    let mut trace = Vec::new();
    let mut eval = |d: f64| -> Result<f64> {
        let a = spectral_abscissa(&build_drifted(grid, d), &modes)?;
        trace.push((d, a));
        Ok(a)
    };
    if eval(0.0)? >= target {
        return Ok(Delta0Estimate { delta0: 0.0, bracket: (0.0, 0.0), trace });
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    while eval(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Ok(Delta0Estimate { delta0: lo, bracket: (lo, f64::INFINITY), trace });
        }
    }
    while hi - lo > DELTA0_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Delta0Estimate { delta0: lo, bracket: (lo, hi), trace })
}

#[derive(Debug, Clone)]
pub struct DecayFit {
    /// Fitted rate, positive for decay.
    pub beta: f64,
    /// Amplitude constant `exp(intercept) / ||W0||_{H1}`.
    pub k4: f64,
    pub intercept: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

pub const PROBE_DT: f64 = 5e-3;
const PROBE_RECORD: usize = 10;

fn pair_from_complex(grid: &Arc<Grid>, z: &[Complex64]) -> Result<FieldPair> {
    let n = grid.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for (i, v) in z.iter().enumerate() {
        a[i + 1] = v.re;
        b[i + 1] = v.im;
    }
    FieldPair::new(ScalarField::new(Arc::clone(grid), a)?, ScalarField::new(Arc::clone(grid), b)?)
}

fn project_out(q: &[f64], z: &mut [Complex64]) {
    let qq: f64 = q.iter().map(|v| v * v).sum();
    let c = real_dot(q, z) / qq;
    z.iter_mut().zip(q).for_each(|(zi, &qi)| *zi -= c * qi);
}

/// Least-squares line `y = a + b t`; returns `(a, b)`.
pub fn fit_line(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mt, slope)
}

/// Evolves `dW/dt = (JL + delta l) W` on E with BDF2 (backward Euler start),
/// projecting onto E every step, and fits `log ||W||_{H1}` over the second
/// half of the record.
pub fn linear_decay_probe(delta: f64, w0: &FieldPair, t_end: f64) -> Result<DecayFit> {
    let grid = Arc::clone(w0.grid());
    let n = grid.len();
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("probe horizon must be positive, got {t_end}")));
    }
    let op = build_drifted(&grid, delta);
    let red = reduce(&op, &kernel_modes(&grid))?.ok_or_else(|| Error::Eigen("probe operator lost its structure".into()))?;
    let scaled = |c: f64| ComplexTridiagonal {
        sub: red.a.sub.iter().map(|v| v * c).collect(),
        diag: red.a.diag.iter().map(|v| v * c).collect(),
        sup: red.a.sup.iter().map(|v| v * c).collect(),
    };
    let euler = scaled(-PROBE_DT).factor_shifted(Complex64::new(-1.0, 0.0));
    let bdf2 = scaled(-2.0 * PROBE_DT).factor_shifted(Complex64::new(-3.0, 0.0));

    let mut z: Vec<Complex64> =
        (1..n - 1).map(|i| Complex64::new(w0.first.values[i], w0.second.values[i])).collect();
    project_out(&red.q, &mut z);
    let norm0 = pair_from_complex(&grid, &z)?.norm(NormKind::H1);
    if norm0 == 0.0 {
        return Err(Error::Config("probe initial datum vanishes on E".into()));
    }
    let steps = (t_end / PROBE_DT).round() as usize;
    let mut times = vec![0.0];
    let mut norms = vec![norm0];
    let mut prev = z.clone();
    euler.solve(&mut z);
    project_out(&red.q, &mut z);
    for k in 1..=steps {
        if k > 1 {
            let mut next: Vec<Complex64> = z.iter().zip(&prev).map(|(a, b)| 4.0 * a - b).collect();
            bdf2.solve(&mut next);
            project_out(&red.q, &mut next);
            prev = std::mem::replace(&mut z, next);
        }
        if k % PROBE_RECORD == 0 || k == steps {
            let v = pair_from_complex(&grid, &z)?.norm(NormKind::H1);
            if !v.is_finite() {
                return Err(Error::Diverged { step: k });
            }
            times.push(k as f64 * PROBE_DT);
            norms.push(v);
        }
    }
    let start = times.partition_point(|&t| t < 0.5 * times[times.len() - 1]);
    let logs: Vec<f64> = norms[start..].iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let (intercept, slope) = fit_line(&times[start..], &logs);
    if slope >= 0.0 {
        return Err(Error::NonDecay { slope });
    }
    Ok(DecayFit { beta: -slope, k4: intercept.exp() / norm0, intercept, times, norms })
}

/// Projection of a pair onto the L² complement of the kernel modes.
pub fn project_to_e(w: &FieldPair) -> Result<FieldPair> {
    let modes = kernel_modes(w.grid());
    let mut out = w.clone();
    for v in [&modes.v1, &modes.v2] {
        let c = out.inner(v)? / v.inner(v)?;
        out = out.sub(&v.scaled(c))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
