//! Tridiagonal eigenvalue and linear-solve kernels.
//!
//! The QL iteration is written once for any scalar with a square root and a
//! modulus. For real input it is the classical implicit QL for symmetric
//! tridiagonals; for complex input it acts on complex-symmetric tridiagonals
//! with complex orthogonal rotations.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn modulus(self) -> f64;
    fn root(self) -> Self;
    fn real(x: f64) -> Self;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn root(self) -> Self {
        self.sqrt()
    }
    fn real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn root(self) -> Self {
        self.sqrt()
    }
    fn real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

const MAX_SWEEPS: usize = 60;

/// Eigenvalues of the symmetric tridiagonal with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples rows `i` and `i + 1`). Unsorted.
pub fn ql_eigenvalues<T: Scalar>(diag: &[T], off: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert_eq!(off.len() + 1, n, "off-diagonal length must be n - 1");
    let zero = T::real(0.0);
    let one = T::real(1.0);
    let two = T::real(2.0);
    let mut d = diag.to_vec();
    let mut e: Vec<T> = off.iter().copied().chain(std::iter::once(zero)).collect();
    let mut f = zero;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].modulus() + e[l].modulus());
        let mut m = l;
        while m < n - 1 && e[m].modulus() > f64::EPSILON * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::Eigen(format!(
                        "QL iteration stalled at index {l} (|e| = {:.3e})",
                        e[l].modulus()
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = (p * p + one).root();
                if (p + r).modulus() < (p - r).modulus() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (one, one, one);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (zero, zero);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = (p * p + e[i] * e[i]).root();
                    if r.modulus() == 0.0 {
                        return Err(Error::Eigen("isotropic rotation in complex QL".into()));
                    }
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].modulus() <= f64::EPSILON * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }
    Ok(d)
}

/// Complex tridiagonal matrix with sub-diagonal `sub[i] = A[i+1][i]` and
/// super-diagonal `sup[i] = A[i][i+1]`.
#[derive(Debug, Clone)]
pub struct ComplexTridiagonal {
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub sup: Vec<Complex64>,
}

impl ComplexTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Eigenvalues through the diagonal similarity to a complex-symmetric
    /// tridiagonal with off-diagonal `sqrt(sub * sup)`.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let off: Vec<Complex64> = self.sub.iter().zip(&self.sup).map(|(a, c)| (a * c).sqrt()).collect();
        ql_eigenvalues(&self.diag, &off)
    }

    pub fn factor_shifted(&self, shift: Complex64) -> TridiagonalLu {
        TridiagonalLu::new(&self.sub, &self.diag, &self.sup, shift)
    }
}

/// LU factorization with partial pivoting of a shifted tridiagonal
/// `A - shift I`. Exactly singular pivots are nudged so that inverse
/// iteration can proceed.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    pub fn new(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64], shift: Complex64) -> Self {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d: Vec<Complex64> = diag.iter().map(|&x| x - shift).collect();
        let mut du = sup.to_vec();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let scale = diag.iter().chain(sub).chain(sup).map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let tiny = Complex64::new(f64::EPSILON * scale, 0.0);
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1].norm() == 0.0 {
            d[n - 1] = tiny;
        }
        TridiagonalLu { dl, d, du, du2, swapped }
    }

    pub fn solve(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

pub(crate) fn cnorm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Bilinear (unconjugated) product with a real vector.
pub(crate) fn real_dot(q: &[f64], z: &[Complex64]) -> Complex64 {
    q.iter().zip(z).map(|(a, b)| b * a).sum()
}
