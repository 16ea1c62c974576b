//! Noise-free statevector VQE and exact diagonalisation.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::pauli::{Axis, PauliString};
use crate::sim::kernel::apply_vec;
use crate::sim::{build_ansatz, Circuit, GateKind, Op};

/// Dense Hermitian diagonalisation of `h`; returns the smallest eigenvalue and its eigenvector.
pub fn exact_ground(h: &PauliSum) -> Result<(f64, DVector<C>)> {
    if h.n > crate::sim::MAX_QUBITS {
        return Err(Error::TooManyQubits(h.n, crate::sim::MAX_QUBITS));
    }
    let m = h.to_matrix();
    let eig = m.symmetric_eigen();
    let (k, e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    Ok((*e, eig.eigenvectors.column(k).into_owned()))
}

/// `H |psi>` term by term.
pub fn apply_hamiltonian(h: &PauliSum, psi: &[C]) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); psi.len()];
    for t in h.iter() {
        for (j, &a) in psi.iter().enumerate() {
            let (ph, k) = t.string.apply_basis(j);
            out[k] += t.coeff * ph * a;
        }
    }
    out
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `U |0...0>` for a noiseless circuit (channels are ignored).
pub fn statevector(c: &Circuit) -> Vec<C> {
    let mut psi = vec![C::new(0.0, 0.0); 1 << c.n];
    psi[0] = C::new(1.0, 0.0);
    for g in c.gates() {
        apply_vec(&mut psi, &g.qubits, &g.matrix());
    }
    psi
}

pub fn energy(c: &Circuit, h: &PauliSum) -> f64 {
    let psi = statevector(c);
    dot(&psi, &apply_hamiltonian(h, &psi)).re
}

/// Layered ansatz bound to a Hamiltonian and a CZ topology.
#[derive(Clone, Debug)]
pub struct AnsatzSpec {
    pub n: usize,
    pub layers: usize,
    pub edges: Vec<(usize, usize)>,
}

impl AnsatzSpec {
    pub fn num_params(&self) -> usize {
        2 * self.n * (self.layers + 1)
    }

    pub fn circuit(&self, params: &[f64]) -> Result<Circuit> {
        build_ansatz(self.n, self.layers, params, &self.edges)
    }

    pub fn energy(&self, params: &[f64], h: &PauliSum) -> Result<f64> {
        Ok(energy(&self.circuit(params)?, h))
    }

    /// Gradient by the two-term shift rule, `(E(t + pi/2) - E(t - pi/2)) / 2`.
    pub fn parameter_shift_gradient(&self, params: &[f64], h: &PauliSum) -> Result<Vec<f64>> {
        let s = std::f64::consts::FRAC_PI_2;
        let mut p = params.to_vec();
        let mut g = Vec::with_capacity(params.len());
        for k in 0..params.len() {
            p[k] = params[k] + s;
            let plus = self.energy(&p, h)?;
            p[k] = params[k] - s;
            let minus = self.energy(&p, h)?;
            p[k] = params[k];
            g.push(0.5 * (plus - minus));
        }
        Ok(g)
    }

    /// Same derivative as [`Self::parameter_shift_gradient`], evaluated with
    /// one backward sweep: `dE/dt_k = Im <lambda_k| P_k |psi_k>`.
    pub fn adjoint_gradient(&self, params: &[f64], h: &PauliSum) -> Result<(f64, Vec<f64>)> {
        let c = self.circuit(params)?;
        let mut psi = statevector(&c);
        let mut lam = apply_hamiltonian(h, &psi);
        let e = dot(&psi, &lam).re;
        // parameter index of each rotation, in circuit order
        let n = self.n;
        let mut index = Vec::new();
        for l in 0..=self.layers {
            index.extend((0..n).map(|q| 2 * n * l + q));
            index.extend((0..n).map(|q| 2 * n * l + n + q));
        }
        let mut grad = vec![0.0; params.len()];
        let mut next = index.len();
        let gates: Vec<_> = c.ops.iter().filter_map(|o| if let Op::Gate(g) = o { Some(g) } else { None }).collect();
        for g in gates.iter().rev() {
            let axis = match g.kind {
                GateKind::Rx(_) => Some(Axis::X),
                GateKind::Rz(_) => Some(Axis::Z),
                _ => None,
            };
            if let Some(a) = axis {
                next -= 1;
                let p = PauliString::single(n, g.qubits[0], a);
                let mut pp = vec![C::new(0.0, 0.0); psi.len()];
                for (j, &v) in psi.iter().enumerate() {
                    let (ph, k) = p.apply_basis(j);
                    pp[k] = ph * v;
                }
                grad[index[next]] = dot(&lam, &pp).im;
            }
            let inv = g.inverse().matrix();
            apply_vec(&mut psi, &g.qubits, &inv);
            apply_vec(&mut lam, &g.qubits, &inv);
        }
        Ok((e, grad))
    }
}

/// Optimiser settings.
#[derive(Clone, Debug)]
pub struct VqeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Initial parameters drawn from `U[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for VqeOptions {
    fn default() -> Self {
        VqeOptions { max_iters: 500, grad_tol: 1e-9, seed: 0, init_scale: 0.1 }
    }
}

#[derive(Clone, Debug)]
pub struct VqeResult {
    pub params: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Quasi-Newton (BFGS) minimisation with Armijo backtracking.
pub fn optimize(spec: &AnsatzSpec, h: &PauliSum, opts: &VqeOptions) -> Result<VqeResult> {
    if h.n != spec.n {
        return Err(Error::InvalidConfig("Hamiltonian and ansatz sizes differ".into()));
    }
    let np = spec.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..np).map(|_| rng.random_range(-opts.init_scale..=opts.init_scale)).collect();
    let (mut f, mut g) = spec.adjoint_gradient(&x, h)?;
    let mut hinv = DMatrix::<f64>::identity(np, np);
    let mut history = vec![f];
    let mut iters = 0;
    while iters < opts.max_iters {
        let gv = DVector::from_column_slice(&g);
        if gv.norm() < opts.grad_tol {
            break;
        }
        let mut dir = -(&hinv * &gv);
        let mut slope = gv.dot(&dir);
        if slope >= 0.0 {
            hinv = DMatrix::identity(np, np);
            dir = -gv.clone();
            slope = -gv.norm_squared();
        }
        let mut step = 1.0;
        let (xn, fnew, gn) = loop {
            let xn: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            let (fnew, gn) = spec.adjoint_gradient(&xn, h)?;
            if fnew <= f + 1e-4 * step * slope || step < 1e-12 {
                break (xn, fnew, gn);
            }
            step *= 0.5;
        };
        iters += 1;
        let s = DVector::from_iterator(np, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(np, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += &s * s.transpose() * (rho * rho * yhy + rho);
        }
        let done = (f - fnew).abs() < 1e-15 && step < 1e-10;
        x = xn;
        f = fnew;
        g = gn;
        history.push(f);
        if done {
            break;
        }
    }
    Ok(VqeResult { params: x, energy: f, iterations: iters, history })
}

/// Flat JSON array of parameters.
pub fn save_params(path: &Path, params: &[f64]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(params)?)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<Vec<f64>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
