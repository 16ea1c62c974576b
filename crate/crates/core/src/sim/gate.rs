//! Gate set used by the ansatz and by the purification gadgets.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C;

use crate::pauli::Axis;

const O: C = C::new(0.0, 0.0);
const L: C = C::new(1.0, 0.0);
const IM: C = C::new(0.0, 1.0);

/// Gate type. Multi-qubit kinds read their qubits in the order stored on [`Gate`].
#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    Rx(f64),
    Ry(f64),
    Rz(f64),
    H,
    S,
    Sdg,
    /// `sqrt(X)`.
    Sx,
    Sxdg,
    Pauli(Axis),
    /// Qubits `[a, b]`.
    Cz,
    /// Qubits `[control, target]`.
    Cnot,
    /// Qubits `[control, targets..]`; applies `base` when the control reads `on`.
    Controlled {
        on: bool,
        base: Box<GateKind>,
    },
    /// Arbitrary unitary on the listed qubits, row-major `2^k x 2^k`.
    Unitary {
        label: String,
        matrix: Arc<Vec<C>>,
    },
}

impl GateKind {
    /// Number of qubits the kind acts on, or `None` for a unitary of any size.
    fn arity(&self) -> Option<usize> {
        match self {
            GateKind::Cz | GateKind::Cnot => Some(2),
            GateKind::Controlled { base, .. } => base.arity().map(|a| a + 1),
            GateKind::Unitary { matrix, .. } => Some((matrix.len() as f64).log2() as usize / 2),
            _ => Some(1),
        }
    }

    /// Row-major matrix of the kind.
    pub fn matrix(&self) -> Vec<C> {
        match self {
            GateKind::Rx(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                vec![C::new(c, 0.0), C::new(0.0, -s), C::new(0.0, -s), C::new(c, 0.0)]
            }
            GateKind::Ry(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                vec![C::new(c, 0.0), C::new(-s, 0.0), C::new(s, 0.0), C::new(c, 0.0)]
            }
            GateKind::Rz(t) => {
                vec![C::from_polar(1.0, -t / 2.0), O, O, C::from_polar(1.0, t / 2.0)]
            }
            GateKind::H => {
                let h = C::new(FRAC_1_SQRT_2, 0.0);
                vec![h, h, h, -h]
            }
            GateKind::S => vec![L, O, O, IM],
            GateKind::Sdg => vec![L, O, O, -IM],
            GateKind::Sx => {
                let a = C::new(0.5, 0.5);
                let b = C::new(0.5, -0.5);
                vec![a, b, b, a]
            }
            GateKind::Sxdg => {
                let a = C::new(0.5, -0.5);
                let b = C::new(0.5, 0.5);
                vec![a, b, b, a]
            }
            GateKind::Pauli(a) => {
                let m = a.matrix();
                vec![m[0][0], m[0][1], m[1][0], m[1][1]]
            }
            GateKind::Cz => {
                let mut m = vec![O; 16];
                for r in 0..4 {
                    m[r * 4 + r] = if r == 3 { -L } else { L };
                }
                m
            }
            GateKind::Cnot => GateKind::Controlled { on: true, base: Box::new(GateKind::Pauli(Axis::X)) }.matrix(),
            GateKind::Controlled { on, base } => {
                // local bit 0 is the control
                let b = base.matrix();
                let mb = (b.len() as f64).sqrt() as usize;
                let m = 2 * mb;
                let mut out = vec![O; m * m];
                let ctrl = usize::from(*on);
                for r in 0..m {
                    for c in 0..m {
                        let (rc, rt) = (r & 1, r >> 1);
                        let (cc, ct) = (c & 1, c >> 1);
                        if rc != cc {
                            continue;
                        }
                        out[r * m + c] = if rc == ctrl {
                            b[rt * mb + ct]
                        } else if rt == ct {
                            L
                        } else {
                            O
                        };
                    }
                }
                out
            }
            GateKind::Unitary { matrix, .. } => matrix.as_ref().clone(),
        }
    }

    pub fn inverse(&self) -> GateKind {
        match self {
            GateKind::Rx(t) => GateKind::Rx(-t),
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Rz(t) => GateKind::Rz(-t),
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            GateKind::Sx => GateKind::Sxdg,
            GateKind::Sxdg => GateKind::Sx,
            GateKind::Controlled { on, base } => GateKind::Controlled { on: *on, base: Box::new(base.inverse()) },
            GateKind::Unitary { label, matrix } => {
                let m = (matrix.len() as f64).sqrt() as usize;
                let mut adj = vec![O; m * m];
                for r in 0..m {
                    for c in 0..m {
                        adj[r * m + c] = matrix[c * m + r].conj();
                    }
                }
                GateKind::Unitary { label: format!("{label}^dg"), matrix: Arc::new(adj) }
            }
            other => other.clone(),
        }
    }

    fn label(&self) -> String {
        match self {
            GateKind::Rx(t) => format!("RX({t})"),
            GateKind::Ry(t) => format!("RY({t})"),
            GateKind::Rz(t) => format!("RZ({t})"),
            GateKind::H => "H".into(),
            GateKind::S => "S".into(),
            GateKind::Sdg => "Sdg".into(),
            GateKind::Sx => "SX".into(),
            GateKind::Sxdg => "SXdg".into(),
            GateKind::Pauli(a) => a.to_char().to_string(),
            GateKind::Cz => "CZ".into(),
            GateKind::Cnot => "CNOT".into(),
            GateKind::Controlled { on, base } => format!("C{}[{}]", u8::from(*on), base.label()),
            GateKind::Unitary { label, .. } => label.clone(),
        }
    }
}

/// A gate placed on concrete qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: Vec<usize>) -> Self {
        if let Some(a) = kind.arity() {
            assert_eq!(a, qubits.len(), "gate {} expects {a} qubits", kind.label());
        }
        for (i, q) in qubits.iter().enumerate() {
            assert!(!qubits[..i].contains(q), "repeated qubit {q} in gate");
        }
        Gate { kind, qubits }
    }

    pub fn rx(q: usize, t: f64) -> Self {
        Gate::new(GateKind::Rx(t), vec![q])
    }
    pub fn rz(q: usize, t: f64) -> Self {
        Gate::new(GateKind::Rz(t), vec![q])
    }
    pub fn h(q: usize) -> Self {
        Gate::new(GateKind::H, vec![q])
    }
    pub fn pauli(q: usize, a: Axis) -> Self {
        Gate::new(GateKind::Pauli(a), vec![q])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Gate::new(GateKind::Cz, vec![a, b])
    }
    pub fn cnot(c: usize, t: usize) -> Self {
        Gate::new(GateKind::Cnot, vec![c, t])
    }
    /// Controlled single-qubit Pauli, used for controlled-O gadgets.
    pub fn cpauli(c: usize, t: usize, a: Axis) -> Self {
        Gate::new(GateKind::Controlled { on: true, base: Box::new(GateKind::Pauli(a)) }, vec![c, t])
    }

    pub fn matrix(&self) -> Vec<C> {
        self.kind.matrix()
    }

    pub fn inverse(&self) -> Gate {
        Gate { kind: self.kind.inverse(), qubits: self.qubits.clone() }
    }

    /// Relabel qubits through `map`.
    pub fn remap(&self, map: &[usize]) -> Gate {
        Gate { kind: self.kind.clone(), qubits: self.qubits.iter().map(|&q| map[q]).collect() }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits.len() >= 2
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.kind.label(), self.qubits)
    }
}

/// Controlled-SWAP of `a` and `b` conditioned on `c`, as seven two-qubit gates:
/// CNOT(b,a), a Toffoli(c,a;b) built from controlled-sqrt(X) and CNOT, CNOT(b,a).
pub fn cswap(c: usize, a: usize, b: usize) -> Vec<Gate> {
    let cv = |ctrl: usize, t: usize, inv: bool| {
        let base = if inv { GateKind::Sxdg } else { GateKind::Sx };
        Gate::new(GateKind::Controlled { on: true, base: Box::new(base) }, vec![ctrl, t])
    };
    vec![
        Gate::cnot(b, a),
        cv(a, b, false),
        Gate::cnot(c, a),
        cv(a, b, true),
        Gate::cnot(c, a),
        cv(c, b, false),
        Gate::cnot(b, a),
    ]
}
