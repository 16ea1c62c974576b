//! Noise channels as ordered lists of local Kraus maps.

use std::fmt;

use num_complex::Complex64 as C;

use super::gate::Gate;
use super::kernel;
use crate::pauli::Axis;

const O: C = C::new(0.0, 0.0);

/// One local map inside a channel.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelOp {
    /// Kraus operators (row-major `2^k x 2^k`) on `qubits`.
    Kraus { qubits: Vec<usize>, ops: Vec<Vec<C>> },
    /// `(1-p) rho + p I/d (x) Tr_S rho` on the listed qubits.
    GlobalDepolarizing { qubits: Vec<usize>, p: f64 },
    /// Deterministic unitary error.
    Unitary(Gate),
}

impl ChannelOp {
    fn dual(&self) -> ChannelOp {
        match self {
            ChannelOp::Kraus { qubits, ops } => {
                let m = 1usize << qubits.len();
                let ops = ops
                    .iter()
                    .map(|k| {
                        let mut a = vec![O; m * m];
                        for r in 0..m {
                            for c in 0..m {
                                a[r * m + c] = k[c * m + r].conj();
                            }
                        }
                        a
                    })
                    .collect();
                ChannelOp::Kraus { qubits: qubits.clone(), ops }
            }
            ChannelOp::GlobalDepolarizing { .. } => self.clone(),
            ChannelOp::Unitary(g) => ChannelOp::Unitary(g.inverse()),
        }
    }

    fn remap(&self, map: &[usize]) -> ChannelOp {
        match self {
            ChannelOp::Kraus { qubits, ops } => {
                ChannelOp::Kraus { qubits: qubits.iter().map(|&q| map[q]).collect(), ops: ops.clone() }
            }
            ChannelOp::GlobalDepolarizing { qubits, p } => {
                ChannelOp::GlobalDepolarizing { qubits: qubits.iter().map(|&q| map[q]).collect(), p: *p }
            }
            ChannelOp::Unitary(g) => ChannelOp::Unitary(g.remap(map)),
        }
    }

    pub fn qubits(&self) -> &[usize] {
        match self {
            ChannelOp::Kraus { qubits, .. } | ChannelOp::GlobalDepolarizing { qubits, .. } => qubits,
            ChannelOp::Unitary(g) => &g.qubits,
        }
    }

    /// Apply to a column-major `d x d` buffer.
    pub(crate) fn apply(&self, rho: &mut [C], d: usize) {
        match self {
            ChannelOp::Kraus { qubits, ops } => {
                let m = 1usize << qubits.len();
                let s = kernel::superop(ops, m);
                kernel::apply_superop(rho, d, qubits, &s);
            }
            ChannelOp::GlobalDepolarizing { qubits, p } => kernel::global_depolarize(rho, d, qubits, *p),
            ChannelOp::Unitary(g) => kernel::conjugate(rho, d, &g.qubits, &g.matrix()),
        }
    }

    /// `sum_k E_k^dagger E_k`, row-major; identity for trace-preserving maps.
    pub fn completeness(&self) -> Vec<C> {
        match self {
            ChannelOp::Kraus { qubits, ops } => {
                let m = 1usize << qubits.len();
                let mut out = vec![O; m * m];
                for k in ops {
                    for r in 0..m {
                        for c in 0..m {
                            let mut acc = O;
                            for t in 0..m {
                                acc += k[t * m + r].conj() * k[t * m + c];
                            }
                            out[r * m + c] += acc;
                        }
                    }
                }
                out
            }
            _ => {
                let m = 1usize << self.qubits().len();
                (0..m * m).map(|i| if i % (m + 1) == 0 { C::new(1.0, 0.0) } else { O }).collect()
            }
        }
    }
}

/// Ordered composition of local maps attached after a gate.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub label: String,
    pub ops: Vec<ChannelOp>,
    /// Expected number of errors contributed (sum of the component error rates).
    pub rate: f64,
}

impl Channel {
    pub fn identity() -> Self {
        Channel { label: "none".into(), ops: Vec::new(), rate: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    /// Adjoint-Kraus channel, components in reverse order.
    pub fn dual(&self) -> Channel {
        Channel {
            label: format!("dual[{}]", self.label),
            ops: self.ops.iter().rev().map(ChannelOp::dual).collect(),
            rate: self.rate,
        }
    }

    pub fn remap(&self, map: &[usize]) -> Channel {
        Channel { label: self.label.clone(), ops: self.ops.iter().map(|o| o.remap(map)).collect(), rate: self.rate }
    }

    pub fn then(mut self, other: Channel) -> Channel {
        if self.is_identity() {
            return other;
        }
        if other.is_identity() {
            return self;
        }
        self.label = format!("{}*{}", other.label, self.label);
        self.ops.extend(other.ops);
        self.rate += other.rate;
        self
    }

    /// Stochastic Pauli: `(1-p) rho + p (px X rho X + py Y rho Y + pz Z rho Z)`.
    pub fn stochastic_pauli(q: usize, p: f64, px: f64, py: f64, pz: f64) -> Channel {
        let ops = vec![
            scaled(&Axis::I, (1.0 - p).sqrt()),
            scaled(&Axis::X, (p * px).sqrt()),
            scaled(&Axis::Y, (p * py).sqrt()),
            scaled(&Axis::Z, (p * pz).sqrt()),
        ];
        Channel {
            label: format!("pauli({p};{px},{py},{pz})"),
            ops: vec![ChannelOp::Kraus { qubits: vec![q], ops }],
            rate: p,
        }
    }

    /// Single-qubit depolarizing `(1-p) rho + p I/2`.
    pub fn depolarizing_1q(q: usize, p: f64) -> Channel {
        let ops = vec![
            scaled(&Axis::I, (1.0 - 0.75 * p).sqrt()),
            scaled(&Axis::X, (p / 4.0).sqrt()),
            scaled(&Axis::Y, (p / 4.0).sqrt()),
            scaled(&Axis::Z, (p / 4.0).sqrt()),
        ];
        Channel { label: format!("depol1({p})"), ops: vec![ChannelOp::Kraus { qubits: vec![q], ops }], rate: p }
    }

    /// Two-qubit depolarizing `(1-p) rho + p I/4 (x) Tr_ab rho`.
    pub fn depolarizing_2q(a: usize, b: usize, p: f64) -> Channel {
        Channel {
            label: format!("depol2({p})"),
            ops: vec![ChannelOp::GlobalDepolarizing { qubits: vec![a, b], p }],
            rate: p,
        }
    }

    /// Depolarizing over a whole register.
    pub fn global_depolarizing(qubits: Vec<usize>, p: f64) -> Channel {
        Channel { label: format!("gdepol({p})"), ops: vec![ChannelOp::GlobalDepolarizing { qubits, p }], rate: p }
    }

    pub fn amplitude_damping(q: usize, p: f64) -> Channel {
        let e0 = vec![C::new(1.0, 0.0), O, O, C::new((1.0 - p).sqrt(), 0.0)];
        let e1 = vec![O, C::new(p.sqrt(), 0.0), O, O];
        Channel {
            label: format!("amp({p})"),
            ops: vec![ChannelOp::Kraus { qubits: vec![q], ops: vec![e0, e1] }],
            rate: p,
        }
    }

    /// Amplitude damping with `gamma = 1 - exp(-t/T1)` followed by the pure
    /// dephasing needed to bring coherences to `exp(-t/T2)`. Requires `T2 <= 2 T1`.
    pub fn thermal_relaxation(q: usize, t1: f64, t2: f64, t: f64) -> Channel {
        let gamma = 1.0 - (-t / t1).exp();
        let extra = (-t * (1.0 / t2 - 0.5 / t1)).exp().min(1.0);
        let lambda = 1.0 - extra * extra;
        let a0 = [C::new(1.0, 0.0), O, O, C::new((1.0 - gamma).sqrt(), 0.0)];
        let a1 = [O, C::new(gamma.sqrt(), 0.0), O, O];
        let p0 = [C::new(1.0, 0.0), O, O, C::new((1.0 - lambda).sqrt(), 0.0)];
        let p1 = [O, O, O, C::new(lambda.sqrt(), 0.0)];
        let mut ops = Vec::new();
        for p in [&p0, &p1] {
            for a in [&a0, &a1] {
                ops.push(mul2(p, a));
            }
        }
        Channel {
            label: format!("thermal(T1={t1},T2={t2},t={t})"),
            ops: vec![ChannelOp::Kraus { qubits: vec![q], ops }],
            rate: gamma + lambda,
        }
    }

    pub fn unitary_error(g: Gate, angle: f64) -> Channel {
        Channel { label: format!("drift({angle})"), ops: vec![ChannelOp::Unitary(g)], rate: angle }
    }
}

fn scaled(a: &Axis, s: f64) -> Vec<C> {
    let m = a.matrix();
    vec![m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s]
}

fn mul2(a: &[C; 4], b: &[C; 4]) -> Vec<C> {
    vec![a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        for op in &self.ops {
            write!(f, " {:?}", op.qubits())?;
        }
        Ok(())
    }
}
