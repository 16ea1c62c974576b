mod common;

use common::*;
use dualgse_core::gevp::*;
use dualgse_core::pauli::build_ising;
use dualgse_core::sim::build_ansatz;
use dualgse_core::subspace::{build_power, BuildOptions};
use dualgse_core::vqe;
use dualgse_core::Complex64 as C;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn real_diag(v: &[f64]) -> DMatrix<C> {
    DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| C::new(x, 0.0))))
}

fn random_spd(r: &mut ChaCha8Rng, m: usize) -> DMatrix<C> {
    let a = DMatrix::from_fn(m, m, |_, _| C::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    &a * a.adjoint() + DMatrix::identity(m, m) * C::new(0.5, 0.0)
}

fn quad_form(a: &DVector<C>, s: &DMatrix<C>) -> C {
    (a.adjoint() * s * a)[(0, 0)]
}

#[test]
fn identity_overlap_keeps_everything() {
    let s = DMatrix::<C>::identity(4, 4);
    let h = real_diag(&[1.0, 2.0, 3.0, 4.0]);
    for thr in [0.0, 1e-6, 0.5, 0.999] {
        assert_eq!(regularize(&s, &h, thr).unwrap().dim(), 4);
    }
    assert!(matches!(regularize(&s, &h, 1.0), Err(dualgse_core::Error::EmptySubspace(_))));
}

#[test]
fn duplicated_row_drops_one_dimension() {
    let mut r = rng(1);
    for m in 2..=6 {
        let basis = DMatrix::from_fn(m + 2, m - 1, |_, _| C::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
        // Gram matrix of m-1 vectors plus a copy of the first one
        let mut cols: Vec<_> = basis.column_iter().map(|c| c.into_owned()).collect();
        cols.push(cols[0].clone());
        let v = DMatrix::from_columns(&cols);
        let s = v.adjoint() * &v;
        let h = random_hermitian(&mut r, m);
        assert_eq!(regularize(&s, &h, 1e-6).unwrap().dim(), m - 1, "m={m}");
    }
}

#[test]
fn diagonal_example() {
    let s = DMatrix::<C>::identity(2, 2);
    let h = real_diag(&[-3.0, -1.0]);
    let sol = solve_pencil(&s, &h, 1e-10, Window::new(-3.3, -2.7)).unwrap();
    assert!((sol.energy + 3.0).abs() < 1e-14);
    assert!((sol.alpha[0].norm() - 1.0).abs() < 1e-12);
    assert!(sol.alpha[1].norm() < 1e-12);
    assert!(solve_pencil(&s, &h, 1e-10, Window::new(-0.9, -0.5)).is_err());
}

#[test]
fn window_around_negative_energy() {
    let w = Window::around(-10.0);
    assert_eq!((w.lo, w.hi), (-11.0, -9.0));
    assert!(w.contains(-10.0) && !w.contains(-11.0) && !w.contains(-9.0));
}

#[test]
fn two_by_two_against_characteristic_polynomial() {
    let mut r = rng(2);
    for _ in 0..50 {
        let s = random_spd(&mut r, 2);
        let h = random_hermitian(&mut r, 2);
        // det(H - E S) = a E^2 + b E + c
        let (s11, s22, s12) = (s[(0, 0)].re, s[(1, 1)].re, s[(0, 1)]);
        let (h11, h22, h12) = (h[(0, 0)].re, h[(1, 1)].re, h[(0, 1)]);
        let a = s11 * s22 - s12.norm_sqr();
        let b = -(h11 * s22 + h22 * s11) + 2.0 * (h12 * s12.conj()).re;
        let c = h11 * h22 - h12.norm_sqr();
        let disc = (b * b - 4.0 * a * c).sqrt();
        let lo = (-b - disc) / (2.0 * a);
        let hi = (-b + disc) / (2.0 * a);
        let red = regularize(&s, &h, 1e-12).unwrap();
        let pairs = eigenpairs(&red);
        assert!((pairs[0].0 - lo).abs() < 1e-9 * (1.0 + lo.abs()));
        assert!((pairs[1].0 - hi).abs() < 1e-9 * (1.0 + hi.abs()));
        let sol = solve(&red, Window::unbounded()).unwrap();
        assert!((sol.energy - lo).abs() < 1e-9 * (1.0 + lo.abs()));
    }
}

#[test]
fn residual_and_normalization() {
    let mut r = rng(3);
    for m in 1..=8 {
        let s = random_spd(&mut r, m);
        let h = random_hermitian(&mut r, m);
        let sol = solve_pencil(&s, &h, 1e-14, Window::unbounded()).unwrap();
        assert_eq!(sol.retained_dim, m);
        let res = &h * &sol.alpha - &s * &sol.alpha * C::new(sol.energy, 0.0);
        let hn = h.norm();
        assert!(res.norm() <= 1e-8 * hn * sol.alpha.norm().max(1.0), "m={m}");
        assert!((quad_form(&sol.alpha, &s) - C::new(1.0, 0.0)).norm() < 1e-8);
        // the unit-diagonal coordinates carry the same norm
        let sn = DMatrix::from_fn(m, m, |i, j| s[(i, j)] / (s[(i, i)].re * s[(j, j)].re).sqrt());
        assert!((quad_form(&sol.alpha_prime, &sn) - C::new(1.0, 0.0)).norm() < 1e-8);
    }
}

#[test]
fn shrinking_the_window_keeps_the_selection() {
    let mut r = rng(4);
    for _ in 0..20 {
        let s = random_spd(&mut r, 5);
        let h = random_hermitian(&mut r, 5);
        let red = regularize(&s, &h, 1e-12).unwrap();
        let wide = Window::new(-1e3, 1e3);
        let e = solve(&red, wide).unwrap().energy;
        let narrow = Window::new(e - 1e-6, 1e3);
        assert_eq!(solve(&red, narrow).unwrap().energy, e);
    }
}

#[test]
fn ties_prefer_identity_weight() {
    let s = DMatrix::<C>::identity(3, 3);
    let h = real_diag(&[-2.0, -2.0, -1.0]);
    let sol = solve_pencil(&s, &h, 1e-12, Window::unbounded()).unwrap();
    assert!(sol.alpha[0].norm() >= sol.alpha[1].norm());
}

#[test]
fn non_positive_diagonal_is_dropped() {
    let mut s = DMatrix::<C>::identity(3, 3);
    s[(2, 2)] = C::new(0.0, 0.0);
    let h = real_diag(&[-1.0, -2.0, -5.0]);
    let sol = solve_pencil(&s, &h, 1e-12, Window::unbounded()).unwrap();
    assert_eq!(sol.retained_dim, 2);
    assert!((sol.energy + 2.0).abs() < 1e-12);
    assert_eq!(sol.alpha[2], C::new(0.0, 0.0));
    let zero = DMatrix::<C>::zeros(2, 2);
    assert!(regularize(&zero, &zero, 1e-3).is_err());
}

#[test]
fn lambda_min_reports_the_unit_diagonal_spectrum() {
    let s = DMatrix::from_row_slice(2, 2, &[C::new(4.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0)]);
    let h = real_diag(&[0.0, 0.0]);
    let sol = solve_pencil(&s, &h, 1e-12, Window::unbounded()).unwrap();
    // unit-diagonal form [[1, 1/2], [1/2, 1]]
    assert!((sol.lambda_min_s - 0.5).abs() < 1e-12);
}

#[test]
fn noiseless_power_subspace_is_variational() {
    let mut r = rng(5);
    for n in [3, 4] {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let h = build_ising(n, &edges).unwrap();
        let (e0, _) = vqe::exact_ground(&h).unwrap();
        for _ in 0..3 {
            let params: Vec<f64> = (0..2 * n * 3).map(|_| r.random_range(-1.0..1.0)).collect();
            let c = build_ansatz(n, 2, &params, &edges).unwrap();
            for m in 2..=5 {
                let mats = build_power(m, &h, &c, &BuildOptions::default()).unwrap();
                if let Ok(sol) = solve_pencil(&mats.s, &mats.h, 1e-12, Window::new(2.0 * e0, 0.0)) {
                    assert!(sol.energy >= e0 - 1e-9, "n={n} m={m}: {} < {e0}", sol.energy);
                }
            }
        }
    }
}

#[test]
fn shot_threshold_scale() {
    assert!((shot_threshold(1e8) - 1e-3).abs() < 1e-18);
    assert!((shot_threshold(1e6) - 1e-2).abs() < 1e-16);
}
