use super::*;
use crate::grid::inner_l2;
use crate::noise::smooth_random;
use crate::profiles::sech;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_grid() -> Arc<Grid> {
    Grid::new(20.0, 2001).unwrap()
}

fn small_grid() -> Arc<Grid> {
    Grid::new(8.0, 161).unwrap()
}

fn schrodinger(g: &Arc<Grid>) -> DiscreteOperator {
    build_schrodinger(g, OperatorBoundary::Dirichlet, PotentialStencil::KernelConsistent)
}

fn random_pair_in_e(g: &Arc<Grid>, seed: u64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = smooth_random(g, &mut rng, 3.0);
    let b = smooth_random(g, &mut rng, 3.0);
    project_to_e(&FieldPair::new(a, b).unwrap()).unwrap()
}

#[test]
fn banded_algebra_matches_dense() {
    let mut a = Banded::zeros(7, 1, 2);
    let mut b = Banded::zeros(7, 2, 1);
    for i in 0..7 {
        for j in 0..7 {
            if a.slot(i, j).is_some() {
                a.set(i, j, (i * 7 + j) as f64 * 0.1 - 1.0);
            }
            if b.slot(i, j).is_some() {
                b.set(i, j, ((i + 2 * j) as f64).sin());
            }
        }
    }
    let (da, db) = (a.to_dense(), b.to_dense());
    assert_eq!(a.transpose().to_dense(), da.transpose());
    assert!((a.matmul(&b).to_dense() - &da * &db).abs().max() < 1e-14);
    assert!((a.combine(2.0, &b, -0.5).to_dense() - (&da * 2.0 - &db * 0.5)).abs().max() < 1e-14);
    let x: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
    let y = a.apply(&x);
    let yd = &da * nalgebra::DVector::from_vec(x);
    assert!(y.iter().zip(yd.iter()).all(|(p, q)| (p - q).abs() < 1e-14));
}

#[test]
fn schrodinger_annihilates_sech() {
    let g = default_grid();
    let s = g.sample(sech);
    for stencil in [PotentialStencil::Sampled, PotentialStencil::KernelConsistent] {
        let r = build_schrodinger(&g, OperatorBoundary::Dirichlet, stencil).apply_scalar(&s).unwrap();
        assert!(r.norm(NormKind::L2) <= 1e-3, "{stencil:?}: {}", r.norm(NormKind::L2));
    }
}

#[test]
fn potential_values() {
    let g = default_grid();
    let v = potential(&g, PotentialStencil::Sampled);
    assert_eq!(v[g.center()], -1.0);
    assert!((v[0] - 1.0).abs() <= 4.0 * (-40.0f64).exp());
    assert!((v[g.len() - 1] - 1.0).abs() <= 4.0 * (-40.0f64).exp());
    let w = potential(&g, PotentialStencil::KernelConsistent);
    let h2 = g.spacing().powi(2);
    assert!(v.iter().zip(&w).all(|(a, b)| (a - b).abs() <= 0.5 * h2));
    // the consistent potential makes the three-point stencil exact on sech
    let n = g.len();
    let x = g.nodes();
    for i in [1, n / 3, n / 2, n - 2] {
        let d2 = (sech(x[i + 1]) - 2.0 * sech(x[i]) + sech(x[i - 1])) / h2;
        assert!((d2 - w[i] * sech(x[i])).abs() < 1e-9);
    }
}

#[test]
fn schrodinger_symmetric_with_real_spectrum() {
    let g = default_grid();
    let l = schrodinger(&g);
    assert!(l.max_asymmetry() <= 1e-12);
    let small = schrodinger(&small_grid());
    let ev = small.interior_dense().complex_eigenvalues();
    assert!(ev.iter().all(|z| z.im.abs() <= 1e-10));
    let mut dense: Vec<f64> = ev.iter().map(|z| z.re).collect();
    dense.sort_by(f64::total_cmp);
    let ql = symmetric_spectrum(&small).unwrap();
    assert!(dense.iter().zip(&ql).all(|(a, b)| (a - b).abs() < 1e-9 * a.abs().max(1.0)));
}

#[test]
fn schrodinger_positivity() {
    let g = default_grid();
    let mu = symmetric_spectrum(&schrodinger(&g)).unwrap();
    assert!(mu[0] >= -1e-6, "min eigenvalue {}", mu[0]);
    assert!(mu[0].abs() <= 1e-6);
    // point-sampled potential: the O(h²) stencil error pushes the ground
    // state to about -h²·7/180
    let sampled = build_schrodinger(&g, OperatorBoundary::Dirichlet, PotentialStencil::Sampled);
    let mu_s = symmetric_spectrum(&sampled).unwrap();
    let predicted = -g.spacing().powi(2) * 7.0 / 180.0;
    assert!((mu_s[0] - predicted).abs() < 0.05 * predicted.abs(), "{}", mu_s[0]);
}

#[test]
fn factor_cases() {
    let g = default_grid();
    let l = build_factor(&g);
    let r = l.apply_scalar(&g.sample(sech)).unwrap();
    assert!(r.norm(NormKind::L2) <= 1e-3);
    let ones = g.sample(|_| 1.0);
    let t = l.apply_scalar(&ones).unwrap();
    for (i, &x) in g.nodes().iter().enumerate().skip(1).take(g.len() - 2) {
        assert!((t.values[i] - x.tanh()).abs() <= 1e-12);
    }
}

/// `||(L - lᵀl) φ||` on a smooth decaying test function.
fn factorization_defect(g: &Arc<Grid>) -> f64 {
    let l = schrodinger(g).blocks[0].clone();
    let f = build_factor(g).blocks[0].clone();
    let diff = l.combine(1.0, &f.transpose().matmul(&f), -1.0);
    let phi = g.sample(|x| (-0.5 * x * x).exp() * (1.0 + 0.3 * x));
    let r = ScalarField::new(Arc::clone(g), diff.apply(&phi.values)).unwrap();
    r.norm(NormKind::L2)
}

#[test]
fn factorization_converges() {
    let g = Grid::new(20.0, 401).unwrap();
    let (coarse, fine) = (factorization_defect(&g), factorization_defect(&g.refined()));
    let h = g.spacing();
    assert!(coarse <= h, "{coarse}");
    let ratio = coarse / fine;
    // centered differences give a second-order defect, which is at least
    // the first-order convergence required
    assert!(ratio >= 1.7, "ratio {ratio}");
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn linearized_kernel() {
    let g = default_grid();
    let op = build_linearized(&g);
    let k = kernel_modes(&g);
    for v in [&k.v1, &k.v2] {
        assert!(op.apply_pair(v).unwrap().norm(NormKind::L2) <= 1e-3);
    }
    assert!(op.complex_interior().is_some());
    assert!(build_drifted(&g, 0.3).complex_interior().is_some());
}

#[test]
fn j_tensor_structure_default_grid() {
    let g = default_grid();
    let mu = symmetric_spectrum(&schrodinger(&g)).unwrap();
    let ev = spectrum(&build_linearized(&g)).unwrap();
    for &m in &mu[..5] {
        for target in [Complex64::new(-m, m), Complex64::new(-m, -m)] {
            let best = ev.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8, "mu {m}: {best:.3e}");
        }
    }
}

#[test]
fn j_tensor_against_dense_oracle() {
    let g = small_grid();
    let mu = symmetric_spectrum(&schrodinger(&g)).unwrap();
    let dense = build_linearized(&g).interior_dense().complex_eigenvalues();
    for &m in &mu[..5] {
        for target in [Complex64::new(-m, m), Complex64::new(-m, -m)] {
            let best = dense.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8, "mu {m}: {best:.3e}");
        }
    }
}

#[test]
fn structured_restriction_matches_dense() {
    let g = small_grid();
    let k = kernel_modes(&g);
    for delta in [0.0, 0.3] {
        let op = build_drifted(&g, delta);
        let fast = restricted_spectrum(&op, &k).unwrap();
        let dense = restricted_spectrum_dense(&op, &k).unwrap();
        assert_eq!(fast.eigenvalues.len(), dense.len());
        for z in &fast.eigenvalues[..12] {
            let best = dense.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8, "delta {delta}: {z} off by {best:.3e}");
        }
        assert!((fast.abscissa - dense[0].re).abs() <= 1e-8);
        assert!((spectral_abscissa(&op, &k).unwrap() - fast.abscissa).abs() <= 1e-10);
    }
    let l = schrodinger(&g);
    let fast = restricted_spectrum(&l, &k).unwrap();
    let dense = restricted_spectrum_dense(&l, &k).unwrap();
    let last = |v: &[Complex64]| v[v.len() - 1].re;
    assert!((last(&fast.eigenvalues) - last(&dense)).abs() < 1e-9);
}

#[test]
fn restricted_gaps_default_grid() {
    let g = default_grid();
    let k = kernel_modes(&g);
    let l = restricted_spectrum(&schrodinger(&g), &k).unwrap();
    let smallest = l.eigenvalues.last().unwrap().re;
    assert!(smallest >= 0.9, "{smallest}");
    assert_eq!(l.eigenvalues.len(), g.len() - 3);

    let r = restricted_spectrum(&build_linearized(&g), &k).unwrap();
    assert!(r.abscissa <= -0.9, "{}", r.abscissa);
    assert_eq!(r.eigenvalues.len(), 2 * (g.len() - 3));
    assert!(r.kernel_overlaps.iter().all(|&o| o <= 1e-8));
    assert!(r.deflation_residuals.iter().all(|&v| v <= 1e-3));
    for p in &r.eigenpairs {
        let w = p.real_field(&g).unwrap();
        for v in [&k.v1, &k.v2] {
            let c = w.inner(v).unwrap().abs() / (w.norm(NormKind::L2) * v.norm(NormKind::L2));
            assert!(c <= 1e-8);
        }
    }
}

#[test]
fn eigenpairs_solve_the_restricted_problem() {
    let g = small_grid();
    let op = build_drifted(&g, 0.2);
    let k = kernel_modes(&g);
    let r = restricted_spectrum(&op, &k).unwrap();
    assert_eq!(r.eigenpairs.len(), KEPT_EIGENPAIRS);
    let n = g.len();
    for p in &r.eigenpairs {
        // real operator on the complex eigenvector, then project onto E
        let re: Vec<f64> = p.vector.iter().map(|z| z.re).collect();
        let im: Vec<f64> = p.vector.iter().map(|z| z.im).collect();
        let (ar, ai) = (op.apply(&re), op.apply(&im));
        let mut res: Vec<Complex64> = ar.iter().zip(&ai).map(|(a, b)| Complex64::new(*a, *b)).collect();
        for c in 0..2 {
            let q: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.0 } else { sech(g.nodes()[i]) }).collect();
            let part = &mut res[c * n..(c + 1) * n];
            let coef = real_dot(&q, part) / q.iter().map(|v| v * v).sum::<f64>();
            part.iter_mut().zip(&q).for_each(|(z, &qi)| *z -= coef * qi);
        }
        for i in [0, n - 1, n, 2 * n - 1] {
            res[i] = Complex64::new(0.0, 0.0);
        }
        let err: f64 = res.iter().zip(&p.vector).map(|(a, v)| (a - p.value * v).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * p.value.norm().max(1.0), "{} residual {err:.3e}", p.value);
    }
}

#[test]
fn ill_conditioned_projection_is_reported() {
    let g = small_grid();
    let z = ScalarField::zeros(&g);
    let modes = KernelModes {
        v1: FieldPair::new(z.clone(), z.clone()).unwrap(),
        v2: FieldPair::new(z.clone(), z).unwrap(),
    };
    let op = build_linearized(&g);
    assert!(matches!(restricted_spectrum(&op, &modes), Err(Error::IllConditioned(_))));
    assert!(matches!(restricted_spectrum_dense(&op, &modes), Err(Error::IllConditioned(_))));
}

#[test]
fn delta0_bisection() {
    let g = Grid::new(20.0, 401).unwrap();
    let est = estimate_delta0(&g, -0.5).unwrap();
    assert!(est.delta0 > 0.0);
    assert!(est.bracket.1 - est.bracket.0 <= DELTA0_TOLERANCE);
    let k = kernel_modes(&g);
    let at = |d: f64| spectral_abscissa(&build_drifted(&g, d), &k).unwrap();
    assert!(at(est.delta0) < -0.5 && at(est.bracket.1) >= -0.5);
    assert!(at(0.0) < at(2.0 * est.delta0));
    // dense sweep: first crossing of the target within one sweep cell
    let crossing = (0..=40).map(|i| 0.05 * i as f64).find(|&d| at(d) >= -0.5).unwrap();
    assert!(crossing - 0.05 <= est.delta0 && est.delta0 <= crossing);
    let fine = estimate_delta0(&g.refined(), -0.5).unwrap();
    assert!((fine.delta0 - est.delta0).abs() <= 0.05 * est.delta0);
}

#[test]
fn delta0_zero_when_target_unreachable() {
    let g = Grid::new(20.0, 201).unwrap();
    let est = estimate_delta0(&g, -5.0).unwrap();
    assert_eq!(est.delta0, 0.0);
    assert_eq!(est.trace.len(), 1);
}

#[test]
fn probe_on_leading_eigenvector() {
    let g = Grid::new(20.0, 401).unwrap();
    let r = restricted_spectrum(&build_linearized(&g), &kernel_modes(&g)).unwrap();
    let lead = &r.eigenpairs[0];
    let fit = linear_decay_probe(0.0, &lead.real_field(&g).unwrap(), 20.0).unwrap();
    let expected = -lead.value.re;
    assert!((fit.beta - expected).abs() <= 0.05 * expected, "{} vs {expected}", fit.beta);
    assert!(fit.k4 > 0.5 && fit.k4 < 2.0);
}

#[test]
fn probe_random_data() {
    let g = Grid::new(20.0, 401).unwrap();
    let w0 = random_pair_in_e(&g, 11);
    let fit = linear_decay_probe(0.0, &w0, 20.0).unwrap();
    assert!(fit.beta >= 0.9, "{}", fit.beta);
    let d0 = estimate_delta0(&g, -0.5).unwrap().delta0;
    let fit = linear_decay_probe(0.5 * d0, &w0, 20.0).unwrap();
    assert!(fit.beta >= 0.45, "{}", fit.beta);
}

#[test]
fn probe_reports_growth() {
    let g = Grid::new(20.0, 201).unwrap();
    let w0 = random_pair_in_e(&g, 3);
    assert!(matches!(linear_decay_probe(2.0, &w0, 20.0), Err(Error::NonDecay { .. })));
}

#[test]
fn norm_equivalence_on_e() {
    let g = Grid::new(20.0, 801).unwrap();
    let op = build_linearized(&g);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for seed in 0..100 {
        let w = random_pair_in_e(&g, 1000 + seed);
        let k = kernel_modes(&g);
        assert!(w.inner(&k.v1).unwrap().abs() < 1e-12 && w.inner(&k.v2).unwrap().abs() < 1e-12);
        let ratio = op.apply_pair(&w).unwrap().norm(NormKind::L2) / w.norm(NormKind::H2);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    println!("norm equivalence bracket: [{lo:.4}, {hi:.4}]");
    assert!(lo > 0.1 && hi < 2.0, "[{lo}, {hi}]");
}

#[test]
fn projection_onto_e() {
    let g = small_grid();
    let w = random_pair_in_e(&g, 5);
    let k = kernel_modes(&g);
    assert!(w.inner(&k.v1).unwrap().abs() < 1e-14);
    assert!(inner_l2(&w.second, k.profile()).unwrap().abs() < 1e-14);
}
