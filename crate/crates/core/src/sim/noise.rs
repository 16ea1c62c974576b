//! Noise models and their attachment to noiseless circuits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::channel::Channel;
use super::circuit::{Circuit, Op};
use super::gate::{Gate, GateKind};
use crate::error::{Error, Result};
use crate::pauli::Axis;

fn ten() -> f64 {
    10.0
}
fn px_default() -> f64 {
    0.2
}
fn pz_default() -> f64 {
    0.6
}
fn sigma_default() -> f64 {
    0.1
}

/// One noise process. Rates for two-qubit gates are `p2 = ratio * p1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    None,
    StochasticPauli {
        p1: f64,
        #[serde(default = "ten")]
        ratio: f64,
        #[serde(default = "px_default")]
        px: f64,
        #[serde(default = "px_default")]
        py: f64,
        #[serde(default = "pz_default")]
        pz: f64,
    },
    /// Depolarizing over the whole register after every gate.
    GlobalDepolarizing {
        p1: f64,
        #[serde(default = "ten")]
        ratio: f64,
    },
    /// One-qubit depolarizing after 1q gates, full two-qubit depolarizing after 2q gates.
    LocalDepolarizing {
        p1: f64,
        #[serde(default = "ten")]
        ratio: f64,
    },
    AmplitudeDamping {
        p1: f64,
        #[serde(default = "ten")]
        ratio: f64,
    },
    /// Per-qubit T1, T2 drawn from normals with relative width `rel_sigma`,
    /// applied to every qubit of each multi-qubit gate. Times in seconds.
    ThermalRelaxation {
        t1: f64,
        t2: f64,
        #[serde(default = "sigma_default")]
        rel_sigma: f64,
        gate_time: f64,
    },
    /// Over-rotation by an angle drawn from `U[0, p]` after each gate.
    CoherentDrift {
        p1: f64,
        #[serde(default = "ten")]
        ratio: f64,
    },
}

impl NoiseSpec {
    pub fn stochastic_pauli(p1: f64) -> Self {
        NoiseSpec::StochasticPauli { p1, ratio: 10.0, px: 0.2, py: 0.2, pz: 0.6 }
    }

    /// Default thermal relaxation: T1 = 50us, T2 = 70us, 200 ns gates.
    pub fn thermal_default() -> Self {
        NoiseSpec::ThermalRelaxation { t1: 50e-6, t2: 70e-6, rel_sigma: 0.1, gate_time: 200e-9 }
    }

    fn amplify(&self, lambda: f64) -> Result<NoiseSpec> {
        let check = |p1: f64, ratio: f64| -> Result<f64> {
            let p = p1 * lambda;
            if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&(p * ratio)) {
                return Err(Error::InvalidConfig(format!("amplified rate {p} (x{ratio}) out of [0, 1]")));
            }
            Ok(p)
        };
        Ok(match self.clone() {
            NoiseSpec::None => NoiseSpec::None,
            NoiseSpec::StochasticPauli { p1, ratio, px, py, pz } => {
                NoiseSpec::StochasticPauli { p1: check(p1, ratio)?, ratio, px, py, pz }
            }
            NoiseSpec::GlobalDepolarizing { p1, ratio } => {
                NoiseSpec::GlobalDepolarizing { p1: check(p1, ratio)?, ratio }
            }
            NoiseSpec::LocalDepolarizing { p1, ratio } => NoiseSpec::LocalDepolarizing { p1: check(p1, ratio)?, ratio },
            NoiseSpec::AmplitudeDamping { p1, ratio } => NoiseSpec::AmplitudeDamping { p1: check(p1, ratio)?, ratio },
            NoiseSpec::CoherentDrift { p1, ratio } => NoiseSpec::CoherentDrift { p1: p1 * lambda, ratio },
            NoiseSpec::ThermalRelaxation { t1, t2, rel_sigma, gate_time } => {
                NoiseSpec::ThermalRelaxation { t1, t2, rel_sigma, gate_time: gate_time * lambda }
            }
        })
    }

    fn validate(&self) -> Result<()> {
        self.amplify(1.0).map(|_| ())
    }
}

/// Composition of noise processes, applied in list order after each gate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub components: Vec<NoiseSpec>,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel { components: Vec::new() }
    }

    pub fn single(spec: NoiseSpec) -> Self {
        NoiseModel { components: vec![spec] }
    }

    pub fn stochastic_pauli(p1: f64) -> Self {
        NoiseModel::single(NoiseSpec::stochastic_pauli(p1))
    }

    pub fn is_noiseless(&self) -> bool {
        self.components.iter().all(|c| matches!(c, NoiseSpec::None))
    }

    /// Scale every rate by `lambda` (gate time for thermal relaxation).
    pub fn amplify(&self, lambda: f64) -> Result<NoiseModel> {
        if lambda < 0.0 {
            return Err(Error::InvalidConfig(format!("negative amplification {lambda}")));
        }
        Ok(NoiseModel { components: self.components.iter().map(|c| c.amplify(lambda)).collect::<Result<_>>()? })
    }

    pub fn validate(&self) -> Result<()> {
        self.components.iter().try_for_each(NoiseSpec::validate)
    }
}

/// Per-register random draws used while attaching noise.
struct Draws {
    rng: ChaCha8Rng,
    t1t2: Vec<Option<(f64, f64)>>,
}

impl Draws {
    fn new(n: usize, seed: u64) -> Self {
        Draws { rng: ChaCha8Rng::seed_from_u64(seed), t1t2: vec![None; n] }
    }

    fn t1t2(&mut self, q: usize, t1: f64, t2: f64, rel: f64, stream: u64) -> (f64, f64) {
        if let Some(v) = self.t1t2[q] {
            return v;
        }
        // a fixed stream per qubit keeps the draws independent of the gate order
        let mut r = ChaCha8Rng::seed_from_u64(stream ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(q as u64 + 1)));
        let n1 = Normal::new(t1, rel * t1).expect("valid normal");
        let n2 = Normal::new(t2, rel * t2).expect("valid normal");
        let a = n1.sample(&mut r).max(1e-3 * t1);
        let b = n2.sample(&mut r).max(1e-3 * t2).min(2.0 * a);
        self.t1t2[q] = Some((a, b));
        (a, b)
    }
}

fn gate_channel(g: &Gate, spec: &NoiseSpec, n: usize, draws: &mut Draws, seed: u64) -> Channel {
    let two = g.is_two_qubit();
    let mut ch = Channel::identity();
    match *spec {
        NoiseSpec::None => {}
        NoiseSpec::StochasticPauli { p1, ratio, px, py, pz } => {
            let p = if two { p1 * ratio } else { p1 };
            for &q in &g.qubits {
                ch = ch.then(Channel::stochastic_pauli(q, p, px, py, pz));
            }
        }
        NoiseSpec::GlobalDepolarizing { p1, ratio } => {
            let p = if two { p1 * ratio } else { p1 };
            ch = Channel::global_depolarizing((0..n).collect(), p);
        }
        NoiseSpec::LocalDepolarizing { p1, ratio } => {
            if two && g.qubits.len() == 2 {
                ch = Channel::depolarizing_2q(g.qubits[0], g.qubits[1], p1 * ratio);
            } else {
                let p = if two { p1 * ratio } else { p1 };
                for &q in &g.qubits {
                    ch = ch.then(Channel::depolarizing_1q(q, p));
                }
            }
        }
        NoiseSpec::AmplitudeDamping { p1, ratio } => {
            let p = if two { p1 * ratio } else { p1 };
            for &q in &g.qubits {
                ch = ch.then(Channel::amplitude_damping(q, p));
            }
        }
        NoiseSpec::ThermalRelaxation { t1, t2, rel_sigma, gate_time } => {
            if two {
                for &q in &g.qubits {
                    let (a, b) = draws.t1t2(q, t1, t2, rel_sigma, seed);
                    ch = ch.then(Channel::thermal_relaxation(q, a, b, gate_time));
                }
            }
        }
        NoiseSpec::CoherentDrift { p1, ratio } => {
            let p = if two { p1 * ratio } else { p1 };
            for &q in &g.qubits {
                let u: f64 = draws.rng.random();
                let angle = u * p;
                let kind = match (&g.kind, two) {
                    (GateKind::Rx(_), false) => GateKind::Rx(angle),
                    (GateKind::Ry(_), false) => GateKind::Ry(angle),
                    (GateKind::Cnot, true) if q == g.qubits[1] => GateKind::Rx(angle),
                    _ => GateKind::Rz(angle),
                };
                ch = ch.then(Channel::unitary_error(Gate::new(kind, vec![q]), angle));
            }
        }
    }
    ch
}

/// Attach the channels of `model` after every gate of a noiseless circuit.
/// Random draws (drift angles, T1/T2) derive from `seed` only, so amplified
/// copies of a model reuse the same realisation.
pub fn attach_noise(c: &Circuit, model: &NoiseModel, seed: u64) -> Result<Circuit> {
    model.validate()?;
    let mut out = Circuit::new(c.n);
    let mut draws = Draws::new(c.n, seed);
    for op in &c.ops {
        out.ops.push(op.clone());
        if let Op::Gate(g) = op {
            let mut ch = Channel::identity();
            for spec in &model.components {
                ch = ch.then(gate_channel(g, spec, c.n, &mut draws, seed));
            }
            if !ch.is_identity() {
                out.ops.push(Op::Channel(ch));
            }
        }
    }
    Ok(out)
}

/// Single-qubit channel of the model with a given Pauli forced on, used in tests.
pub fn forced_pauli(q: usize, a: Axis) -> Channel {
    match a {
        Axis::X => Channel::stochastic_pauli(q, 1.0, 1.0, 0.0, 0.0),
        Axis::Y => Channel::stochastic_pauli(q, 1.0, 0.0, 1.0, 0.0),
        Axis::Z => Channel::stochastic_pauli(q, 1.0, 0.0, 0.0, 1.0),
        Axis::I => Channel::identity(),
    }
}
