#![allow(dead_code)]

use dualgse_core::sim::{attach_noise, Circuit, Gate, NoiseModel, NoiseSpec};
use dualgse_core::Complex64 as C;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Full-register matrix of a local row-major operator, built entry by entry.
pub fn embed(n: usize, qs: &[usize], u: &[C]) -> DMatrix<C> {
    let d = 1usize << n;
    let m = 1usize << qs.len();
    let local = |i: usize| qs.iter().enumerate().fold(0, |acc, (t, &q)| acc | (((i >> q) & 1) << t));
    let rest = |i: usize| qs.iter().fold(i, |acc, &q| acc & !(1 << q));
    DMatrix::from_fn(d, d, |r, c| if rest(r) == rest(c) { u[local(r) * m + local(c)] } else { C::new(0.0, 0.0) })
}

pub fn random_gate(r: &mut ChaCha8Rng, n: usize) -> Vec<Gate> {
    let a = r.random_range(0..n);
    let mut b = r.random_range(0..n);
    while n > 1 && b == a {
        b = r.random_range(0..n);
    }
    let t: f64 = r.random_range(-3.2..3.2);
    match r.random_range(0..7) {
        0 => vec![Gate::rx(a, t)],
        1 => vec![Gate::rz(a, t)],
        2 => vec![Gate::h(a)],
        3 if n > 1 => vec![Gate::cz(a, b)],
        4 if n > 1 => vec![Gate::cnot(a, b)],
        5 if n > 2 => {
            let mut c = r.random_range(0..n);
            while c == a || c == b {
                c = r.random_range(0..n);
            }
            dualgse_core::sim::cswap(c, a, b)
        }
        _ => vec![Gate::rx(a, t), Gate::rz(a, -t / 2.0)],
    }
}

pub fn random_noiseless(r: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let mut c = Circuit::new(n);
    while c.gates().count() < len {
        for g in random_gate(r, n) {
            c.push(g);
        }
    }
    c
}

pub fn random_model(r: &mut ChaCha8Rng) -> NoiseModel {
    let p: f64 = r.random_range(0.001..0.05);
    let spec = match r.random_range(0..7) {
        0 => NoiseSpec::stochastic_pauli(p),
        1 => NoiseSpec::GlobalDepolarizing { p1: p, ratio: 10.0 },
        2 => NoiseSpec::LocalDepolarizing { p1: p, ratio: 10.0 },
        3 => NoiseSpec::AmplitudeDamping { p1: p, ratio: 10.0 },
        4 => NoiseSpec::ThermalRelaxation { t1: 50e-6, t2: 70e-6, rel_sigma: 0.1, gate_time: 2e-6 },
        5 => NoiseSpec::CoherentDrift { p1: 10.0 * p, ratio: 10.0 },
        _ => NoiseSpec::StochasticPauli { p1: p, ratio: 5.0, px: 0.5, py: 0.1, pz: 0.4 },
    };
    NoiseModel::single(spec)
}

pub fn random_noisy(r: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let c = random_noiseless(r, n, len);
    let m = random_model(r);
    attach_noise(&c, &m, r.random()).unwrap()
}

pub fn random_hermitian(r: &mut ChaCha8Rng, d: usize) -> DMatrix<C> {
    let a = DMatrix::from_fn(d, d, |_, _| C::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * C::new(0.5, 0.0)
}

pub fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
