mod common;

use std::collections::BTreeSet;

use common::*;
use dualgse_core::gevp::{solve_pencil, Window};
use dualgse_core::pauli::{build_ising, PauliString, PauliSum, SystemPartition};
use dualgse_core::purification::{dsp_expectation, DspMode, GadgetNoise};
use dualgse_core::sim::{attach_noise, build_ansatz, Circuit, NoiseModel, NoiseSpec};
use dualgse_core::subspace::*;
use dualgse_core::vqe;
use dualgse_core::Complex64 as C;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn path(n: usize) -> Vec<(usize, usize)> {
    (0..n - 1).map(|i| (i, i + 1)).collect()
}

fn random_ansatz(r: &mut ChaCha8Rng, n: usize, layers: usize) -> Circuit {
    let params: Vec<f64> = (0..2 * n * (layers + 1)).map(|_| r.random_range(-1.5..1.5)).collect();
    build_ansatz(n, layers, &params, &path(n)).unwrap()
}

fn noisy(c: &Circuit, p1: f64) -> Circuit {
    attach_noise(c, &NoiseModel::stochastic_pauli(p1), 3).unwrap()
}

fn half() -> C {
    C::new(0.5, 0.0)
}

fn dense_power(m: usize, bnd: &DMatrix<C>, sym: &DMatrix<C>, h: &DMatrix<C>) -> (DMatrix<C>, DMatrix<C>) {
    let d = h.nrows();
    let mut pw = vec![DMatrix::<C>::identity(d, d)];
    for k in 1..2 * m {
        pw.push(&pw[k - 1] * h);
    }
    let tr = |a: &DMatrix<C>, k: usize| (a * &pw[k]).trace();
    let mut s = DMatrix::zeros(m, m);
    let mut hh = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let (a, b) = match (i, j) {
                (0, 0) => (C::new(d as f64, 0.0), h.trace()),
                (0, j) => (tr(bnd, j - 1), tr(bnd, j)),
                (i, 0) => (tr(bnd, i - 1).conj(), tr(bnd, i).conj()),
                _ => (tr(sym, i + j - 2), tr(sym, i + j - 1)),
            };
            s[(i, j)] = a;
            hh[(i, j)] = b;
        }
    }
    (s, hh)
}

fn states_of(c: &Circuit) -> (DMatrix<C>, DMatrix<C>) {
    let rho = c.run().unwrap().data;
    let bar = c.dual().run().unwrap().data;
    let bnd = (&rho + &bar) * half();
    let sym = (&bar * &rho + &rho * &bar) * half();
    (bnd, sym)
}

fn close(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}

#[test]
fn power_matches_dense_formulas() {
    let mut r = rng(1);
    for n in [2, 3, 4] {
        let h = build_ising(n, &path(n)).unwrap();
        let c = noisy(&random_ansatz(&mut r, n, 2), 2e-3);
        let (bnd, sym) = states_of(&c);
        for m in 1..=4 {
            let mats = build_power(m, &h, &c, &BuildOptions::default()).unwrap();
            let (s, hh) = dense_power(m, &bnd, &sym, &h.to_matrix());
            assert!(close(&mats.s, &s) < 1e-10, "S n={n} m={m}");
            assert!(close(&mats.h, &hh) < 1e-10, "H n={n} m={m}");
        }
    }
}

#[test]
fn power_corner_and_pure_state_elements() {
    let mut r = rng(2);
    let n = 3;
    let h = build_ising(n, &path(n)).unwrap();
    let c = random_ansatz(&mut r, n, 2);
    let m1 = build_power(1, &h, &c, &BuildOptions::default()).unwrap();
    assert_eq!(m1.s[(0, 0)], C::new(8.0, 0.0));
    assert!(m1.h[(0, 0)].norm() < 1e-15);
    assert_eq!(m1.plan.count(true), 0);

    let m2 = build_power(2, &h, &c, &BuildOptions::default()).unwrap();
    let e = vqe::energy(&c, &h);
    assert!((m2.s[(1, 1)] - C::new(1.0, 0.0)).norm() < 1e-12);
    assert!((m2.h[(1, 1)].re - e).abs() < 1e-12);
    assert!((m2.h[(0, 1)].re - e).abs() < 1e-12);
    // pure states measure the identity exactly
    assert!(m2.var_s[(1, 1)].abs() < 1e-12);
}

#[test]
fn m1_power_has_no_in_window_eigenvalue() {
    let h = build_ising(4, &path(4)).unwrap();
    let (e0, _) = vqe::exact_ground(&h).unwrap();
    let c = random_ansatz(&mut rng(3), 4, 1);
    let m = build_power(1, &h, &c, &BuildOptions::default()).unwrap();
    assert!(solve_pencil(&m.s, &m.h, 1e-12, Window::around(e0)).is_err());
}

#[test]
fn fault_matches_dense_formulas() {
    let mut r = rng(4);
    let n = 3;
    let h = build_ising(n, &path(n)).unwrap();
    let base = random_ansatz(&mut r, n, 2);
    let circuits = amplified_circuits(&base, &NoiseModel::stochastic_pauli(5e-3), &[1.0, 2.0, 3.0], 9).unwrap();
    let rhos: Vec<_> = circuits.iter().map(|c| c.run().unwrap().data).collect();
    let bars: Vec<_> = circuits.iter().map(|c| c.dual().run().unwrap().data).collect();
    let hm = h.to_matrix();
    let mats = build_fault(&h, &circuits, &BuildOptions::default()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let a = &rhos[i] * &bars[j];
            let b = &rhos[j] * &bars[i];
            let s = 0.5 * (a.trace().re + b.trace().re);
            let e = 0.5 * ((&a * &hm).trace().re + (&b * &hm).trace().re);
            assert!((mats.s[(i, j)] - C::new(s, 0.0)).norm() < 1e-12);
            assert!((mats.h[(i, j)] - C::new(e, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn fault_m1_is_the_dsp_estimate() {
    let mut r = rng(5);
    let n = 3;
    let h = build_ising(n, &path(n)).unwrap();
    let c = noisy(&random_ansatz(&mut r, n, 2), 1e-2);
    let mats = build_fault(&h, std::slice::from_ref(&c), &BuildOptions::default()).unwrap();
    let dsp = dsp_expectation(&c, &h, DspMode::Ancilla, &GadgetNoise::none()).unwrap();
    assert!((mats.h[(0, 0)].re / mats.s[(0, 0)].re - dsp.value).abs() < 1e-10);
}

#[test]
fn noiseless_fault_is_rank_one() {
    let mut r = rng(6);
    let n = 4;
    let h = build_ising(n, &path(n)).unwrap();
    let (e0, _) = vqe::exact_ground(&h).unwrap();
    let base = random_ansatz(&mut r, n, 1);
    let circuits = amplified_circuits(&base, &NoiseModel::none(), &[1.0, 2.0, 3.0], 0).unwrap();
    let mats = build_fault(&h, &circuits, &BuildOptions::default()).unwrap();
    for z in mats.s.iter() {
        assert!((z - C::new(1.0, 0.0)).norm() < 1e-12);
    }
    let e = vqe::energy(&base, &h);
    let sol = solve_pencil(&mats.s, &mats.h, 1e-8, Window::new(2.0 * e0, 0.0)).unwrap();
    assert_eq!(sol.retained_dim, 1);
    assert!((sol.energy - e).abs() < 1e-10);
}

#[test]
fn dc_matches_blockwise_products() {
    let mut r = rng(7);
    let n = 4;
    let h = build_ising(n, &path(n)).unwrap();
    let part = SystemPartition::new(n, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let a = noisy(&random_ansatz(&mut r, 2, 2), 4e-3);
    let b = noisy(&random_ansatz(&mut r, 2, 2), 4e-3);
    let (bnd_a, sym_a) = states_of(&a);
    let (bnd_b, sym_b) = states_of(&b);
    // qubit 0 is the least significant bit, so block B is the left Kronecker factor
    let bnd = bnd_b.kronecker(&bnd_a);
    let sym = sym_b.kronecker(&sym_a);
    for m in 1..=4 {
        let mats = build_dc(m, &h, &part, &[a.clone(), b.clone()], &BuildOptions::default()).unwrap();
        let (s, hh) = dense_power(m, &bnd, &sym, &h.to_matrix());
        assert!(close(&mats.s, &s) < 1e-10, "S m={m}");
        assert!(close(&mats.h, &hh) < 1e-10, "H m={m}");
    }
}

#[test]
fn product_states_factorize() {
    let mut r = rng(8);
    let a = random_noisy(&mut r, 2, 8).run().unwrap().data;
    let b = random_noisy(&mut r, 2, 8).run().unwrap().data;
    let full = b.kronecker(&a);
    for _ in 0..20 {
        let pa = PauliString::parse(&random_label(&mut r, 2)).unwrap();
        let pb = PauliString::parse(&random_label(&mut r, 2)).unwrap();
        let p = pa.embed(4, &[0, 1]).mul(&pb.embed(4, &[2, 3])).1;
        let lhs = (&full * p.to_matrix()).trace();
        let rhs = (&a * pa.to_matrix()).trace() * (&b * pb.to_matrix()).trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}

fn random_label(r: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| ['I', 'X', 'Y', 'Z'][r.random_range(0..4)]).collect()
}

#[test]
fn dc_m2_reproduces_the_separable_energy() {
    let mut r = rng(9);
    let n = 4;
    let h = build_ising(n, &path(n)).unwrap();
    let part = SystemPartition::new(n, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let a = random_ansatz(&mut r, 2, 2);
    let b = random_ansatz(&mut r, 2, 2);
    let mut joint = Circuit::new(4);
    joint.extend(&a.remap(4, &[0, 1]));
    joint.extend(&b.remap(4, &[2, 3]));
    let sep = vqe::energy(&joint, &h);
    let mats = build_dc(2, &h, &part, &[a, b], &BuildOptions::default()).unwrap();
    assert!((mats.h[(1, 1)].re - sep).abs() < 1e-12);
    assert!((mats.s[(1, 1)].re - 1.0).abs() < 1e-12);
}

#[test]
fn oracle_and_circuit_backends_agree() {
    let mut r = rng(10);
    let circ = BuildOptions { backend: Backend::Circuit, ..Default::default() };
    let orac = BuildOptions::default();
    for n in [2, 3, 4] {
        let h = build_ising(n, &path(n)).unwrap();
        let c = noisy(&random_ansatz(&mut r, n, 1), 1e-2);
        for m in 1..=3 {
            let x = build_power(m, &h, &c, &orac).unwrap();
            let y = build_power(m, &h, &c, &circ).unwrap();
            assert!(max_abs(&(&x.s - &y.s)) < 1e-8 && max_abs(&(&x.h - &y.h)) < 1e-8, "power n={n} m={m}");
        }
        let amp = amplified_circuits(&c.noiseless(), &NoiseModel::stochastic_pauli(1e-2), &[1.0, 1.5, 2.0], 4).unwrap();
        for conv in [Convolution::Symmetric, Convolution::Asymmetric] {
            let o = BuildOptions { convolution: conv, ..orac };
            let k = BuildOptions { convolution: conv, ..circ };
            let x = build_fault(&h, &amp, &o).unwrap();
            let y = build_fault(&h, &amp, &k).unwrap();
            assert!(max_abs(&(&x.s - &y.s)) < 1e-8 && max_abs(&(&x.h - &y.h)) < 1e-8, "fault n={n} {conv:?}");
        }
    }
    let h = build_ising(4, &path(4)).unwrap();
    let part = SystemPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let blocks = [noisy(&random_ansatz(&mut r, 2, 1), 1e-2), noisy(&random_ansatz(&mut r, 2, 1), 1e-2)];
    for m in 1..=3 {
        let x = build_dc(m, &h, &part, &blocks, &orac).unwrap();
        let y = build_dc(m, &h, &part, &blocks, &circ).unwrap();
        assert!(max_abs(&(&x.s - &y.s)) < 1e-8 && max_abs(&(&x.h - &y.h)) < 1e-8, "dc m={m}");
    }
}

#[test]
fn asymmetric_fault_uses_the_plain_product() {
    let mut r = rng(11);
    let n = 3;
    let h = build_ising(n, &path(n)).unwrap();
    let amp =
        amplified_circuits(&random_ansatz(&mut r, n, 2), &NoiseModel::stochastic_pauli(1e-2), &[1.0, 2.0], 2).unwrap();
    let rhos: Vec<_> = amp.iter().map(|c| c.run().unwrap().data).collect();
    let bars: Vec<_> = amp.iter().map(|c| c.dual().run().unwrap().data).collect();
    let hm = h.to_matrix();
    let opts = BuildOptions { convolution: Convolution::Asymmetric, ..Default::default() };
    let mats = build_fault(&h, &amp, &opts).unwrap();
    // 0.5 (Tr[bar_j rho_i H] + conj Tr[bar_i rho_j H])
    let (i, j) = (0, 1);
    let want = ((&bars[j] * &rhos[i] * &hm).trace() + (&bars[i] * &rhos[j] * &hm).trace().conj()) * half();
    assert!((mats.h[(i, j)] - want).norm() < 1e-12);
    assert!(plan_power(2, &h, &amp[0], &opts).is_err());
}

#[test]
fn matrices_are_hermitian_and_psd() {
    let mut r = rng(12);
    for trial in 0..12 {
        let n = 2 + trial % 3;
        let h = build_ising(n, &path(n)).unwrap();
        let c = attach_noise(&random_ansatz(&mut r, n, 2), &random_model(&mut r), trial as u64).unwrap();
        let amp = amplified_circuits(&c.noiseless(), &NoiseModel::stochastic_pauli(3e-3), &[1.0, 2.0, 3.0], 1).unwrap();
        for mats in [
            build_power(3, &h, &c, &BuildOptions::default()).unwrap(),
            build_fault(&h, &amp, &BuildOptions::default()).unwrap(),
        ] {
            assert!(max_abs(&(&mats.s - mats.s.adjoint())) < 1e-10);
            assert!(max_abs(&(&mats.h - mats.h.adjoint())) < 1e-10);
            let lmin = mats.s.clone().symmetric_eigen().eigenvalues.min();
            assert!(lmin >= -1e-9, "trial {trial}: min eigenvalue {lmin}");
            assert!(mats.var_s.iter().chain(mats.var_h.iter()).all(|&v| v >= 0.0));
        }
    }
}

/// Enumerate `(ordered state pair, Pauli)` queries the fault matrices need, straight from the formulas.
fn brute_fault_queries(m: usize, h: &PauliSum) -> usize {
    let mut set = BTreeSet::new();
    for i in 0..m {
        for j in 0..m {
            set.insert((i, j, PauliString::identity(h.n)));
            for t in h.iter() {
                set.insert((i, j, t.string));
            }
        }
    }
    set.len()
}

#[test]
fn fault_query_count_matches_enumeration() {
    let mut r = rng(13);
    for n in [3, 4, 6] {
        let h = build_ising(n, &path(n)).unwrap();
        let base = random_ansatz(&mut r, n, 1);
        for m in 1..=5 {
            let lambdas: Vec<f64> = (1..=m).map(|k| k as f64).collect();
            let amp = amplified_circuits(&base, &NoiseModel::stochastic_pauli(1e-4), &lambdas, 0).unwrap();
            let plan = plan_fault(&h, &amp, &BuildOptions::default()).unwrap();
            assert_eq!(plan.count(true), brute_fault_queries(m, &h), "n={n} m={m}");
            assert_eq!(plan.count(true), m * m * (h.len() + 1));
        }
    }
}

#[test]
fn reuse_never_exceeds_no_reuse() {
    let mut r = rng(14);
    let n = 4;
    let h = build_ising(n, &path(n)).unwrap();
    let c = noisy(&random_ansatz(&mut r, n, 1), 1e-3);
    let part = SystemPartition::new(n, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let blocks = [noisy(&random_ansatz(&mut r, 2, 1), 1e-3), noisy(&random_ansatz(&mut r, 2, 1), 1e-3)];
    for m in 1..=5 {
        let lambdas: Vec<f64> = (1..=m).map(|k| k as f64).collect();
        let amp = amplified_circuits(&c.noiseless(), &NoiseModel::stochastic_pauli(1e-3), &lambdas, 0).unwrap();
        for plan in [
            plan_power(m, &h, &c, &BuildOptions::default()).unwrap(),
            plan_fault(&h, &amp, &BuildOptions::default()).unwrap(),
            plan_dc(m, &h, &part, &blocks, &BuildOptions::default()).unwrap(),
        ] {
            assert!(plan.count(true) <= plan.count(false), "{:?} m={m}", plan.kind);
            let mut keys = plan.queries.clone();
            keys.sort();
            keys.dedup();
            assert_eq!(keys.len(), plan.queries.len());
            // block observables cannot outnumber the local Pauli group
            if plan.kind == SubspaceKind::DivideAndConquer {
                for s in 0..plan.states.len() {
                    assert!(plan.queries.iter().filter(|k| k.state == s).count() <= 16);
                }
            }
        }
    }
}

#[test]
fn identical_blocks_share_states() {
    let mut r = rng(15);
    let n = 4;
    let h = build_ising(n, &path(n)).unwrap();
    let part = SystemPartition::new(n, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let a = random_ansatz(&mut r, 2, 1);
    let same = plan_dc(3, &h, &part, &[a.clone(), a.clone()], &BuildOptions::default()).unwrap();
    let b = random_ansatz(&mut r, 2, 1);
    let diff = plan_dc(3, &h, &part, &[a, b], &BuildOptions::default()).unwrap();
    assert_eq!(same.states.len(), 2);
    assert_eq!(diff.states.len(), 4);
    assert!(same.count(true) < diff.count(true));
}

#[test]
fn spec_validation() {
    assert!(SubspaceSpec::power(0).validate().is_err());
    assert!(SubspaceSpec::fault_with(vec![1.0, 0.5]).validate().is_err());
    assert!(SubspaceSpec::fault_with(vec![0.5]).validate().is_err());
    assert!(SubspaceSpec::fault(3).validate().is_ok());
    assert_eq!(SubspaceSpec::fault(3).lambdas, vec![1.0, 2.0, 3.0]);
    let spec = SubspaceSpec { partition: None, ..SubspaceSpec::dc(3, SystemPartition::whole(2)) };
    assert!(spec.validate().is_err());
    let h = build_ising(3, &path(3)).unwrap();
    let wrong = SystemPartition::new(3, vec![vec![0], vec![1, 2]]).unwrap();
    let c1 = Circuit::new(1);
    assert!(plan_dc(2, &h, &wrong, &[c1.clone(), c1], &BuildOptions::default()).is_err());
}

#[test]
fn ledger_and_matrix_csv_shapes() {
    let mut r = rng(16);
    let h = build_ising(3, &path(3)).unwrap();
    let c = noisy(&random_ansatz(&mut r, 3, 1), 1e-3);
    let mats = build_power(3, &h, &c, &BuildOptions::default()).unwrap();
    let s = mats.matrix_csv('S');
    assert!(s.starts_with("i,j,re,im,var\n"));
    assert_eq!(s.lines().count(), 1 + 9);
    let ledger = mats.ledger_csv(Some(100.0));
    assert_eq!(ledger.lines().count(), 1 + mats.plan.count(true));
    assert!(ledger.lines().skip(1).all(|l| l.split(',').count() == 5));
    let plan_csv = mats.plan.to_csv();
    assert!(plan_csv.starts_with("state_id,axes,refs\n"));
}

#[test]
fn build_dispatches_on_spec() {
    let mut r = rng(17);
    let n = 3;
    let h = build_ising(n, &path(n)).unwrap();
    let base = random_ansatz(&mut r, n, 1);
    let noise = NoiseModel::single(NoiseSpec::stochastic_pauli(1e-3));
    let via_spec = build(&SubspaceSpec::power(3), &h, Some(&base), &[], &noise, 5, &BuildOptions::default()).unwrap();
    let direct = build_power(3, &h, &attach_noise(&base, &noise, 5).unwrap(), &BuildOptions::default()).unwrap();
    assert_eq!(via_spec.s, direct.s);
    assert_eq!(via_spec.h, direct.h);
    assert!(build(&SubspaceSpec::fault(2), &h, None, &[], &noise, 5, &BuildOptions::default()).is_err());
}
