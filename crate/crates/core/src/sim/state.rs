//! Dense density matrices (also used for dual states, which may be unnormalised).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::pauli::PauliString;

/// Largest register simulated densely.
pub const MAX_QUBITS: usize = 10;

/// `2^n x 2^n` Hermitian operator, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub n: usize,
    pub data: DMatrix<C>,
}

impl DensityMatrix {
    pub fn from_matrix(n: usize, data: DMatrix<C>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n, MAX_QUBITS));
        }
        if data.nrows() != 1 << n || data.ncols() != 1 << n {
            return Err(Error::InvalidConfig(format!("matrix is {}x{}, expected 2^{n}", data.nrows(), data.ncols())));
        }
        Ok(DensityMatrix { n, data })
    }

    /// `|0...0><0...0|`.
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_state(n, 0)
    }

    pub fn basis_state(n: usize, k: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n, MAX_QUBITS));
        }
        let d = 1usize << n;
        let mut data = DMatrix::zeros(d, d);
        data[(k, k)] = C::new(1.0, 0.0);
        Ok(DensityMatrix { n, data })
    }

    pub fn pure(n: usize, psi: &[C]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        Self::from_matrix(n, &v * v.adjoint())
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let d = 1usize << n;
        Self::from_matrix(n, DMatrix::identity(d, d) * C::new(1.0 / d as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn trace(&self) -> C {
        self.data.trace()
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `max |A - A^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                e = e.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        e
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_part(&self.data).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// `(p_k, psi_k)` with `p_k` descending.
    pub fn spectral_decompose(&self) -> Vec<(f64, DVector<C>)> {
        let eig = hermitian_part(&self.data).symmetric_eigen();
        let mut pairs: Vec<(f64, DVector<C>)> =
            eig.eigenvalues.iter().enumerate().map(|(k, &p)| (p, eig.eigenvectors.column(k).into_owned())).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }

    /// `Tr[rho P]` in `O(d)`.
    pub fn expect_pauli(&self, p: &PauliString) -> C {
        trace_with_pauli(&self.data, p)
    }
}

fn hermitian_part(m: &DMatrix<C>) -> DMatrix<C> {
    (m + m.adjoint()) * C::new(0.5, 0.0)
}

/// `Tr[A P] = sum_j A[j, j ^ x] * phase(j)`.
pub fn trace_with_pauli(a: &DMatrix<C>, p: &PauliString) -> C {
    let d = a.nrows();
    let mut acc = C::new(0.0, 0.0);
    let s = a.as_slice();
    for j in 0..d {
        let (ph, k) = p.apply_basis(j);
        acc += s[k * d + j] * ph;
    }
    acc
}

/// `Tr[A P B P]` in `O(d^2)` for a Pauli string `P`.
pub fn trace_pauli_sandwich(a: &DMatrix<C>, p: &PauliString, b: &DMatrix<C>) -> C {
    // (P B P)_{ij} = ph(i ^ x) B_{i^x, j^x} ph(j) since P_{i, i^x} = ph(i ^ x)
    let d = a.nrows();
    let x = p.x as usize;
    let ph: Vec<C> = (0..d).map(|j| p.apply_basis(j).0).collect();
    let sa = a.as_slice();
    let sb = b.as_slice();
    let mut acc = C::new(0.0, 0.0);
    for j in 0..d {
        let jx = j ^ x;
        for i in 0..d {
            let ix = i ^ x;
            // Tr[A M] = sum_{i,j} A_{j,i} M_{i,j}
            acc += sa[i * d + j] * ph[ix] * sb[jx * d + ix] * ph[j];
        }
    }
    acc
}

/// `Tr[A B]` in `O(d^2)`.
pub fn trace_product(a: &DMatrix<C>, b: &DMatrix<C>) -> C {
    let d = a.nrows();
    let sa = a.as_slice();
    let sb = b.as_slice();
    let mut acc = C::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            acc += sa[j * d + i] * sb[i * d + j];
        }
    }
    acc
}

/// `1/2 ||A - B||_1` via singular values.
pub fn trace_distance(a: &DMatrix<C>, b: &DMatrix<C>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidConfig("trace distance of matrices with different shapes".into()));
    }
    let diff = a - b;
    Ok(0.5 * diff.singular_values().iter().sum::<f64>())
}
