//! Sampling-overhead metrics for solved pencils.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::pauli::PauliSum;

/// `gamma = sum_h |c_h|`.
pub fn gamma(h: &PauliSum) -> f64 {
    h.l1_norm()
}

/// Divide-and-conquer overhead `||alpha'||_2^4`.
pub fn dc_overhead(alpha_prime: &DVector<C>) -> f64 {
    alpha_prime.norm_squared().powi(2)
}

/// `M^2 Q ||alpha'||_2^4`, the shot requirement with `gamma` and the target precision factored out.
pub fn cost_metric(m: usize, queries: usize, alpha_prime: &DVector<C>) -> f64 {
    (m * m) as f64 * queries as f64 * dc_overhead(alpha_prime)
}

/// `||alpha'||^4 Q_dc / Q_whole`.
pub fn r_ratio(alpha_prime: &DVector<C>, q_dc: usize, q_whole: usize) -> f64 {
    dc_overhead(alpha_prime) * q_dc as f64 / q_whole as f64
}

/// `alpha'` measured against the diagonal of a reference overlap matrix, e.g.
/// the noise-free one when comparing noisy and noise-free coefficients.
pub fn alpha_prime_against(alpha: &DVector<C>, reference: &DMatrix<C>) -> DVector<C> {
    DVector::from_iterator(alpha.len(), alpha.iter().enumerate().map(|(i, a)| a * reference[(i, i)].re.max(0.0).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectBound {
    pub lambda_min: f64,
    /// `(prod_i S_ii)^(1/M)`, an upper bound on `lambda_min` for PSD `S`.
    pub hadamard_bound: f64,
    /// `16 gamma^2 M^2 / lambda_min^2` (precision factored out).
    pub ns_scaling: f64,
}

pub fn postselect_bound(s: &DMatrix<C>, gamma: f64, m: usize) -> PostselectBound {
    let lambda_min = s.clone().symmetric_eigen().eigenvalues.min();
    let log_prod: f64 = (0..s.nrows()).map(|i| s[(i, i)].re.ln()).sum();
    let hadamard_bound = (log_prod / s.nrows() as f64).exp();
    let mf = m as f64;
    PostselectBound {
        lambda_min,
        hadamard_bound,
        ns_scaling: 16.0 * gamma * gamma * mf * mf / (lambda_min * lambda_min),
    }
}

/// Growth of the shot requirement under depolarizing rate `p` for a symmetric two-block split.
pub fn depol_amplification(p: f64) -> f64 {
    (1.0 - p).powi(-8)
}
