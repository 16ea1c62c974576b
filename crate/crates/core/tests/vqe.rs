mod common;

use dualgse_core::vqe::{exact_ground, optimize, AnsatzSpec, VqeOptions};
use dualgse_core::{build_ising, PauliString, PauliSum};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::Rng;

fn path(n: usize) -> Vec<(usize, usize)> {
    (0..n - 1).map(|i| (i, i + 1)).collect()
}

/// Ground energy of the open transverse-field chain `-sum ZZ - sum X` from its
/// Bogoliubov-de Gennes spectrum: `E0 = -1/2 sum_k Lambda_k`.
fn free_fermion_ground(n: usize) -> f64 {
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 2.0;
    }
    for i in 0..n - 1 {
        a[(i, i + 1)] = -1.0;
        a[(i + 1, i)] = -1.0;
        b[(i, i + 1)] = -1.0;
        b[(i + 1, i)] = 1.0;
    }
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&a);
    m.view_mut((0, n), (n, n)).copy_from(&b);
    m.view_mut((n, 0), (n, n)).copy_from(&(-&b));
    m.view_mut((n, n), (n, n)).copy_from(&(-&a));
    let ev = m.symmetric_eigen().eigenvalues;
    -0.5 * ev.iter().filter(|&&e| e > 0.0).sum::<f64>()
}

#[test]
fn exact_ground_small_cases() {
    let mut h = PauliSum::zero(1);
    h.add_term(C::new(-1.0, 0.0), PauliString::parse("X").unwrap());
    let (e, v) = exact_ground(&h).unwrap();
    assert!((e + 1.0).abs() < 1e-12);
    assert!((v.norm() - 1.0).abs() < 1e-12);

    let (e, _) = exact_ground(&build_ising(2, &[(0, 1)]).unwrap()).unwrap();
    assert!((e + 5f64.sqrt()).abs() < 1e-12, "{e}");
}

#[test]
fn exact_ground_matches_free_fermions() {
    for n in [2, 3, 5, 8] {
        let h = build_ising(n, &path(n)).unwrap();
        let (e, v) = exact_ground(&h).unwrap();
        let ff = free_fermion_ground(n);
        assert!((e - ff).abs() < 1e-9, "n={n}: {e} vs {ff}");
        // eigenvector residual
        let m = h.to_matrix();
        let r = &m * &v - &v * C::new(e, 0.0);
        assert!(r.norm() < 1e-9);
    }
    assert!(exact_ground(&build_ising(11, &path(11)).unwrap()).is_err());
}

#[test]
fn gradients_agree_with_finite_differences() {
    let mut rng = common::rng(7);
    for n in 1..=4 {
        let edges = if n > 1 { path(n) } else { vec![] };
        let h = build_ising(n, &edges).unwrap();
        let spec = AnsatzSpec { n, layers: 2, edges };
        for _ in 0..5 {
            let p: Vec<f64> = (0..spec.num_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ps = spec.parameter_shift_gradient(&p, &h).unwrap();
            let (e, adj) = spec.adjoint_gradient(&p, &h).unwrap();
            assert!((e - spec.energy(&p, &h).unwrap()).abs() < 1e-12);
            let step = 1e-5;
            for k in 0..p.len() {
                let mut q = p.clone();
                q[k] += step;
                let fp = spec.energy(&q, &h).unwrap();
                q[k] -= 2.0 * step;
                let fm = spec.energy(&q, &h).unwrap();
                let fd = (fp - fm) / (2.0 * step);
                let tol = 1e-6 * fd.abs().max(1.0);
                assert!((ps[k] - fd).abs() < tol, "n={n} k={k}: {} vs {fd}", ps[k]);
                assert!((adj[k] - ps[k]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn optimize_single_qubit() {
    let mut h = PauliSum::zero(1);
    h.add_term(C::new(-1.0, 0.0), PauliString::parse("X").unwrap());
    let spec = AnsatzSpec { n: 1, layers: 0, edges: vec![] };
    let r = optimize(&spec, &h, &VqeOptions::default()).unwrap();
    assert!((r.energy + 1.0).abs() < 1e-6, "{}", r.energy);
}

#[test]
fn optimize_four_qubit_path() {
    let n = 4;
    let h = build_ising(n, &path(n)).unwrap();
    let (e0, _) = exact_ground(&h).unwrap();
    let spec = AnsatzSpec { n, layers: 8, edges: path(n) };
    let opts = VqeOptions { seed: 3, ..Default::default() };
    let r = optimize(&spec, &h, &opts).unwrap();
    assert!(r.energy >= e0 - 1e-9);
    assert!(r.energy - e0 <= 1e-2, "{} vs {e0}", r.energy);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    // determinism
    let again = optimize(&spec, &h, &opts).unwrap();
    assert_eq!(r.params, again.params);
}
