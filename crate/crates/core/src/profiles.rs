//! Closed-form wall objects sampled on a grid: the static wall, its mobile
//! frame, axial rotations, the two-parameter wall family, the traveling
//! wall and the kernel modes of the linearization.

use std::sync::Arc;

use crate::grid::{FieldPair, Grid, ScalarField, VectorField3};

/// Hyperbolic secant; exactly zero once `cosh` would overflow.
#[inline]
pub fn sech(x: f64) -> f64 {
    if x.abs() > 350.0 {
        0.0
    } else {
        1.0 / x.cosh()
    }
}

/// Rotation angle about `e1` and translation along the wire.
///
/// Angles are kept unwrapped so cumulative rotation is preserved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollectiveCoordinates {
    pub theta: f64,
    pub sigma: f64,
}

impl CollectiveCoordinates {
    pub const ZERO: CollectiveCoordinates = CollectiveCoordinates { theta: 0.0, sigma: 0.0 };

    pub fn new(theta: f64, sigma: f64) -> Self {
        CollectiveCoordinates { theta, sigma }
    }

    pub fn norm(&self) -> f64 {
        self.theta.hypot(self.sigma)
    }

    pub fn distance(&self, other: &CollectiveCoordinates) -> f64 {
        (self.theta - other.theta).hypot(self.sigma - other.sigma)
    }
}

/// The static wall `(tanh x, 0, sech x)` at a single abscissa.
#[inline]
pub fn wall_at(x: f64) -> [f64; 3] {
    [x.tanh(), 0.0, sech(x)]
}

/// First mobile-frame vector `(sech x, 0, -tanh x)`.
#[inline]
pub fn frame1_at(x: f64) -> [f64; 3] {
    [sech(x), 0.0, -x.tanh()]
}

pub const FRAME2: [f64; 3] = [0.0, 1.0, 0.0];

/// Rotation by `theta` about `e1`.
#[inline]
pub fn rotate(theta: f64, v: [f64; 3]) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]]
}

pub fn rotate_field(theta: f64, f: &VectorField3) -> VectorField3 {
    VectorField3 {
        grid: Arc::clone(&f.grid),
        values: f.values.iter().map(|&v| rotate(theta, v)).collect(),
    }
}

#[inline]
pub fn family_at(lambda: CollectiveCoordinates, x: f64) -> [f64; 3] {
    rotate(lambda.theta, wall_at(x - lambda.sigma))
}

pub fn wall_profile(grid: &Arc<Grid>) -> VectorField3 {
    grid.sample3(wall_at)
}

/// Mobile frame `(M1, M2)` completing `M0` to a right-handed triad.
pub fn frame_vectors(grid: &Arc<Grid>) -> (VectorField3, VectorField3) {
    (grid.sample3(frame1_at), VectorField3::uniform(grid, FRAME2))
}

/// `R_theta(M0(x - sigma))`, evaluated analytically at the shifted abscissas.
pub fn wall_family(lambda: CollectiveCoordinates, grid: &Arc<Grid>) -> VectorField3 {
    grid.sample3(|x| family_at(lambda, x))
}

/// Exact traveling wall `R_{delta t}(M0(x + delta t))`.
pub fn traveling_wall(delta: f64, t: f64, grid: &Arc<Grid>) -> VectorField3 {
    let phase = delta * t;
    grid.sample3(|x| rotate(phase, wall_at(x + phase)))
}

/// Zero modes of the linearized operator: `v1 = (0, sech)`, `v2 = (sech, 0)`.
#[derive(Debug, Clone)]
pub struct KernelModes {
    pub v1: FieldPair,
    pub v2: FieldPair,
}

impl KernelModes {
    /// The common sech profile both modes are built from.
    pub fn profile(&self) -> &ScalarField {
        &self.v2.first
    }
}

pub fn kernel_modes(grid: &Arc<Grid>) -> KernelModes {
    let s = grid.sample(sech);
    let z = ScalarField::zeros(grid);
    KernelModes {
        v1: FieldPair { first: z.clone(), second: s.clone() },
        v2: FieldPair { first: s, second: z },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cross3, dot3, inner_l2, norm3};
    use std::f64::consts::PI;

    fn default_grid() -> Arc<Grid> {
        Grid::new(20.0, 2001).unwrap()
    }

    fn close3(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|k| (a[k] - b[k]).abs() <= tol)
    }

    #[test]
    fn wall_values() {
        let g = default_grid();
        let m0 = wall_profile(&g);
        assert_eq!(m0.values[g.center()], [0.0, 0.0, 1.0]);
        // tanh 1 and sech 1 to 16 digits
        let at1 = wall_at(1.0);
        assert!((at1[0] - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert!((at1[2] - 0.648_054_273_663_885_4).abs() < 1e-15);
        assert!(m0.max_unit_defect() <= 1e-15);
    }

    #[test]
    fn sech_guard() {
        assert_eq!(sech(400.0), 0.0);
        assert_eq!(sech(-351.0), 0.0);
        assert!(sech(349.0) > 0.0);
    }

    #[test]
    fn frame_is_right_handed_orthonormal() {
        let g = default_grid();
        let m0 = wall_profile(&g);
        let (m1, m2) = frame_vectors(&g);
        assert_eq!(m1.values[g.center()], [1.0, 0.0, 0.0]);
        for i in 0..g.len() {
            let (a, b, c) = (m0.values[i], m1.values[i], m2.values[i]);
            assert!(dot3(a, b).abs() <= 1e-15);
            assert!((norm3(b) - 1.0).abs() <= 1e-15);
            assert!(close3(cross3(a, b), c, 1e-14));
        }
    }

    #[test]
    fn rotation_cases() {
        let v = [0.3, -0.2, 0.9];
        assert_eq!(rotate(0.0, v), v);
        assert_eq!(rotate(1.234, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0]);
        assert!(close3(rotate(PI / 2.0, [0.0, 0.0, 1.0]), [0.0, -1.0, 0.0], 1e-15));
    }

    #[test]
    fn family_cases() {
        let g = default_grid();
        let m0 = wall_profile(&g);
        assert_eq!(wall_family(CollectiveCoordinates::ZERO, &g), m0);
        assert_eq!(family_at(CollectiveCoordinates::new(0.0, 0.37), 0.37)[0], 0.0);
        let flipped = wall_family(CollectiveCoordinates::new(PI, 0.0), &g);
        for (i, &x) in g.nodes().iter().enumerate() {
            assert!(close3(flipped.values[i], [x.tanh(), 0.0, -sech(x)], 1e-15));
            assert!(close3(flipped.values[i], rotate(PI, m0.values[i]), 0.0));
        }
    }

    #[test]
    fn traveling_wall_cases() {
        let g = default_grid();
        let m0 = wall_profile(&g);
        assert_eq!(traveling_wall(0.3, 0.0, &g), m0);
        assert_eq!(traveling_wall(0.0, 7.0, &g), m0);
        let u = traveling_wall(0.1, 10.0, &g);
        let m = wall_family(CollectiveCoordinates::new(1.0, -1.0), &g);
        for i in 0..g.len() {
            assert!(close3(u.values[i], m.values[i], 1e-15));
        }
    }

    #[test]
    fn kernel_mode_properties() {
        let g = default_grid();
        let k = kernel_modes(&g);
        assert_eq!(k.v1.inner(&k.v2).unwrap(), 0.0);
        let n1 = k.v1.inner(&k.v1).unwrap();
        assert!((n1 - 2.0 * 20f64.tanh()).abs() < 1e-6);
        assert!((inner_l2(k.profile(), k.profile()).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn group_property_on_grid_shifts() {
        let g = default_grid();
        let h = g.spacing();
        let (t1, t2, s2) = (0.4, -1.1, 0.3);
        let shift = 7usize;
        let s1 = shift as f64 * h;
        let combined = wall_family(CollectiveCoordinates::new(t1 + t2, s1 + s2), &g);
        let inner = wall_family(CollectiveCoordinates::new(t2, s2), &g);
        for i in shift..g.len() {
            let expect = rotate(t1, inner.values[i - shift]);
            assert!(close3(combined.values[i], expect, 1e-15));
        }
    }

    #[test]
    fn frame_completeness() {
        let g = Grid::new(5.0, 101).unwrap();
        let m0 = wall_profile(&g);
        let (m1, m2) = frame_vectors(&g);
        for i in 0..g.len() {
            let w = {
                let raw = [0.3 + i as f64 * 0.01, -0.7, 0.2];
                let n = norm3(raw);
                [raw[0] / n, raw[1] / n, raw[2] / n]
            };
            let (a, b, c) = (dot3(w, m0.values[i]), dot3(w, m1.values[i]), dot3(w, m2.values[i]));
            let back: [f64; 3] =
                std::array::from_fn(|k| a * m0.values[i][k] + b * m1.values[i][k] + c * m2.values[i][k]);
            assert!(close3(back, w, 1e-14));
        }
    }

    #[test]
    fn profiles_stay_on_sphere() {
        let g = default_grid();
        for f in [
            wall_family(CollectiveCoordinates::new(2.3, -4.1), &g),
            traveling_wall(0.05, 13.0, &g),
            rotate_field(0.7, &wall_profile(&g)),
        ] {
            assert!(f.max_unit_defect() <= 1e-14);
        }
    }
}
