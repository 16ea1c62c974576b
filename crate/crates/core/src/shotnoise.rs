//! Single-shot variances and Gaussian shot-noise sampling of the mitigated energy.

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gevp::{self, Window};
use crate::pauli::PauliString;
use crate::sim::state::trace_pauli_sandwich;
use crate::sim::trace_with_pauli;
use crate::subspace::SubspaceMatrices;

/// Variance of the ancilla `<X (x) P0>` readout of a DSP circuit:
/// `Tr[(rho bar + rho P bar P)/2] - Tr[(bar rho + rho bar)/2 P]^2`.
pub fn var_dsp(rho: &DMatrix<C>, bar: &DMatrix<C>, p: &PauliString) -> f64 {
    let prod = rho * bar;
    let second = 0.5 * (prod.trace().re + trace_pauli_sandwich(rho, p, bar).re);
    let mean = trace_with_pauli(&prod, p).re;
    second - mean * mean
}

/// Variance of a product of two independent random variables.
pub fn var_product(mean_a: f64, var_a: f64, mean_b: f64, var_b: f64) -> f64 {
    var_a * var_b + var_a * mean_b * mean_b + var_b * mean_a * mean_a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    /// Total shots `N_s`, split equally over the queries.
    pub shots: f64,
    pub samples: usize,
    pub seed: u64,
    /// Share one draw among all references to a query. When false every
    /// reference is an independent query and the shots are split over all of them.
    pub reuse: bool,
}

impl ShotConfig {
    pub fn new(shots: f64, seed: u64) -> Self {
        ShotConfig { shots, samples: 1000, seed, reuse: true }
    }
}

fn check_shots(mats: &SubspaceMatrices, cfg: &ShotConfig) -> Result<f64> {
    let q = mats.plan.count(cfg.reuse);
    if q == 0 {
        return Ok(f64::INFINITY);
    }
    if !(cfg.shots >= q as f64) {
        return Err(Error::ShotBudget(cfg.shots, q));
    }
    Ok(cfg.shots / q as f64)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One shot-noise realization of `(S, H)`.
pub fn perturb(mats: &SubspaceMatrices, cfg: &ShotConfig, rng: &mut ChaCha8Rng) -> Result<(DMatrix<C>, DMatrix<C>)> {
    let per_query = check_shots(mats, cfg)?;
    let sd: Vec<f64> = mats.vars.iter().map(|v| (v / per_query).sqrt()).collect();
    if cfg.reuse {
        let noisy: Vec<f64> = mats.values.iter().zip(&sd).map(|(v, s)| v + s * gauss(rng)).collect();
        return Ok(mats.assemble(&noisy));
    }
    // independent draw for every reference, in element order
    let m = mats.m();
    let mut draw = |e: &crate::subspace::ElementExpr| {
        e.terms.iter().fold(e.constant, |acc, (c, qs)| {
            acc + c * qs.iter().map(|&q| mats.values[q] + sd[q] * gauss(rng)).product::<f64>()
        })
    };
    let mut s = DMatrix::zeros(m, m);
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let k = crate::subspace::upper_index(m, i, j);
            for (mat, expr) in [(&mut s, &mats.plan.s_expr[k]), (&mut h, &mats.plan.h_expr[k])] {
                let mut z = draw(expr);
                if i == j {
                    z = C::new(z.re, 0.0);
                }
                mat[(i, j)] = z;
                mat[(j, i)] = z.conj();
            }
        }
    }
    Ok((s, h))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistribution {
    /// Accepted samples in sample-index order.
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the accepted samples.
    pub stddev: f64,
    pub rejected: usize,
}

impl EnergyDistribution {
    pub fn from_samples(samples: Vec<f64>, rejected: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Numerical(format!("all {rejected} samples rejected")));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let stddev = (samples.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(EnergyDistribution { samples, mean, stddev, rejected })
    }

    /// `sample_idx,E` followed by a `# mean,stddev,rejected` summary line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample_idx,E\n");
        for (i, e) in self.samples.iter().enumerate() {
            s.push_str(&format!("{i},{e:.15e}\n"));
        }
        s.push_str(&format!("# mean={:.15e},stddev={:.15e},rejected={}\n", self.mean, self.stddev, self.rejected));
        s
    }
}

/// Draw `cfg.samples` perturbed pencils and solve each. `threshold` defaults to
/// `10 / sqrt(N_s)`. Sample `k` uses stream `k` of the seeded generator.
pub fn sample_distribution(
    mats: &SubspaceMatrices,
    cfg: &ShotConfig,
    threshold: Option<f64>,
    window: Window,
) -> Result<EnergyDistribution> {
    check_shots(mats, cfg)?;
    let thr = threshold.unwrap_or_else(|| gevp::shot_threshold(cfg.shots));
    let results: Vec<Option<f64>> = (0..cfg.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let (s, h) = perturb(mats, cfg, &mut rng)?;
            Ok(gevp::solve_pencil(&s, &h, thr, window).ok().map(|sol| sol.energy))
        })
        .collect::<Result<_>>()?;
    let rejected = results.iter().filter(|r| r.is_none()).count();
    EnergyDistribution::from_samples(results.into_iter().flatten().collect(), rejected)
}

/// Right-hand side of `s <= 4 gamma Q ||S0^-1|| N_s^(-1/2)`; infinite when `S0` is singular.
pub fn stddev_bound(gamma: f64, queries: usize, s0: &DMatrix<C>, shots: f64) -> f64 {
    let eig = s0.clone().symmetric_eigen();
    let lmin = eig.eigenvalues.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) {
        return f64::INFINITY;
    }
    4.0 * gamma * queries as f64 / lmin / shots.sqrt()
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
