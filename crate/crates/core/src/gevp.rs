//! Regularized generalized eigenvalue problem `H a = E S a`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open energy interval used to pick the physical eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Window { lo, hi }
    }

    /// `(1.1 E, 0.9 E)` for a negative reference energy `E`.
    pub fn around(e_true: f64) -> Self {
        let (a, b) = (1.1 * e_true, 0.9 * e_true);
        Window { lo: a.min(b), hi: a.max(b) }
    }

    pub fn contains(&self, e: f64) -> bool {
        e > self.lo && e < self.hi
    }

    pub fn unbounded() -> Self {
        Window { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }
}

/// Pencil projected onto the retained eigenvectors of the unit-diagonal `S`.
#[derive(Clone, Debug)]
pub struct Reduced {
    /// Retained eigenvalues of the unit-diagonal `S` (the reduced `S`, diagonal).
    pub s: DVector<f64>,
    /// Reduced `H`, Hermitian.
    pub h: DMatrix<C>,
    /// Maps reduced coordinates back to the original basis.
    pub basis: DMatrix<C>,
    /// `sqrt(S_ii)` for every original index (0 where the element was dropped).
    pub scale: Vec<f64>,
    /// Full spectrum of the unit-diagonal `S`, ascending.
    pub spectrum: Vec<f64>,
}

impl Reduced {
    pub fn dim(&self) -> usize {
        self.s.len()
    }
}

fn hermitian_part(a: &DMatrix<C>) -> DMatrix<C> {
    (a + a.adjoint()) * C::new(0.5, 0.0)
}

/// Scale `S` to unit diagonal, eigendecompose, and keep eigenvectors whose
/// eigenvalue exceeds `threshold` times the largest one. Basis elements with a
/// non-positive diagonal entry are dropped before scaling.
pub fn regularize(s: &DMatrix<C>, h: &DMatrix<C>, threshold: f64) -> Result<Reduced> {
    let m = s.nrows();
    if m == 0 || s.ncols() != m || h.shape() != (m, m) {
        return Err(Error::Numerical("pencil matrices must be square and of equal size".into()));
    }
    let keep: Vec<usize> = (0..m).filter(|&i| s[(i, i)].re > 0.0 && s[(i, i)].re.is_finite()).collect();
    if keep.is_empty() {
        return Err(Error::EmptySubspace(threshold));
    }
    let k = keep.len();
    let mut scale = vec![0.0; m];
    for &i in &keep {
        scale[i] = s[(i, i)].re.sqrt();
    }
    let mut sn = DMatrix::<C>::zeros(k, k);
    let mut hn = DMatrix::<C>::zeros(k, k);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            let d = 1.0 / (scale[i] * scale[j]);
            sn[(a, b)] = s[(i, j)] * d;
            hn[(a, b)] = h[(i, j)] * d;
        }
    }
    let eig = hermitian_part(&sn).symmetric_eigen();
    let mut spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    let mu_max = spectrum.last().copied().unwrap_or(0.0);
    if !(mu_max > 0.0) {
        return Err(Error::EmptySubspace(threshold));
    }
    let cut = threshold * mu_max;
    let retained: Vec<usize> = (0..k).filter(|&c| eig.eigenvalues[c] > cut).collect();
    if retained.is_empty() {
        return Err(Error::EmptySubspace(threshold));
    }
    let r = retained.len();
    let mut u = DMatrix::<C>::zeros(k, r);
    let mut mu = DVector::<f64>::zeros(r);
    for (c, &col) in retained.iter().enumerate() {
        u.set_column(c, &eig.eigenvectors.column(col));
        mu[c] = eig.eigenvalues[col];
    }
    let h_red = hermitian_part(&(u.adjoint() * hermitian_part(&hn) * &u));
    // alpha_i = u_i y / sqrt(S_ii)
    let mut basis = DMatrix::<C>::zeros(m, r);
    for (a, &i) in keep.iter().enumerate() {
        for c in 0..r {
            basis[(i, c)] = u[(a, c)] / scale[i];
        }
    }
    Ok(Reduced { s: mu, h: h_red, basis, scale, spectrum })
}

#[derive(Clone, Debug)]
pub struct GevpSolution {
    pub energy: f64,
    /// Coefficients in the original basis, normalized so `a^dg S a = 1`.
    pub alpha: DVector<C>,
    /// Coefficients in the unit-diagonal basis, `sqrt(S_ii) a_i`.
    pub alpha_prime: DVector<C>,
    pub retained_dim: usize,
    /// Smallest eigenvalue of the unit-diagonal `S` before truncation.
    pub lambda_min_s: f64,
}

/// All eigenpairs of the reduced pencil as `(E, alpha)`, ascending in `E`.
pub fn eigenpairs(red: &Reduced) -> Vec<(f64, DVector<C>)> {
    let r = red.dim();
    let inv_sqrt: Vec<f64> = red.s.iter().map(|&x| 1.0 / x.sqrt()).collect();
    let mut b = red.h.clone();
    for i in 0..r {
        for j in 0..r {
            b[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = hermitian_part(&b).symmetric_eigen();
    let mut out: Vec<(f64, DVector<C>)> = (0..r)
        .map(|c| {
            let y = DVector::from_iterator(r, (0..r).map(|i| eig.eigenvectors[(i, c)] * inv_sqrt[i]));
            (eig.eigenvalues[c], &red.basis * y)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Smallest in-window eigenvalue of the reduced pencil. Ties within 1e-12 go to
/// the eigenvector with the larger first component.
pub fn solve(red: &Reduced, window: Window) -> Result<GevpSolution> {
    let pairs = eigenpairs(red);
    let mut best: Option<&(f64, DVector<C>)> = None;
    for p in pairs.iter().filter(|p| p.0.is_finite() && window.contains(p.0)) {
        best = match best {
            None => Some(p),
            Some(b) if (p.0 - b.0).abs() <= 1e-12 => {
                if p.1[0].norm() > b.1[0].norm() {
                    Some(p)
                } else {
                    Some(b)
                }
            }
            Some(b) => Some(b),
        };
    }
    let (energy, alpha) = best.cloned().ok_or(Error::NoEigenvalueInWindow(window.lo, window.hi))?;
    let alpha_prime = DVector::from_iterator(alpha.len(), alpha.iter().zip(&red.scale).map(|(a, s)| a * *s));
    Ok(GevpSolution { energy, alpha, alpha_prime, retained_dim: red.dim(), lambda_min_s: red.spectrum[0] })
}

/// [`regularize`] followed by [`solve`].
pub fn solve_pencil(s: &DMatrix<C>, h: &DMatrix<C>, threshold: f64, window: Window) -> Result<GevpSolution> {
    solve(&regularize(s, h, threshold)?, window)
}

/// Threshold used with `shots` total shots: `10 / sqrt(N_s)`.
pub fn shot_threshold(shots: f64) -> f64 {
    10.0 / shots.sqrt()
}
