//! Circuits as ordered gate and channel operations.

use std::fmt;

use super::channel::Channel;
use super::gate::Gate;
use super::state::DensityMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Gate(Gate),
    Channel(Channel),
}

/// Ordered list of operations on an `n`-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub ops: Vec<Op>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit { n, ops: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) {
        debug_assert!(g.qubits.iter().all(|&q| q < self.n), "gate {g} out of range");
        self.ops.push(Op::Gate(g));
    }

    pub fn push_channel(&mut self, c: Channel) {
        if !c.is_identity() {
            self.ops.push(Op::Channel(c));
        }
    }

    pub fn extend(&mut self, other: &Circuit) {
        assert_eq!(self.n, other.n);
        self.ops.extend(other.ops.iter().cloned());
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.ops.iter().filter_map(|o| match o {
            Op::Gate(g) => Some(g),
            _ => None,
        })
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.ops.iter().filter_map(|o| match o {
            Op::Channel(c) => Some(c),
            _ => None,
        })
    }

    /// Sum of channel error rates.
    pub fn expected_errors(&self) -> f64 {
        self.channels().map(|c| c.rate).sum()
    }

    pub fn is_noiseless(&self) -> bool {
        self.channels().all(|c| c.is_identity())
    }

    /// Drop every channel.
    pub fn noiseless(&self) -> Circuit {
        Circuit { n: self.n, ops: self.ops.iter().filter(|o| matches!(o, Op::Gate(_))).cloned().collect() }
    }

    /// Embed into an `n`-qubit register, qubit `q` going to `map[q]`.
    pub fn remap(&self, n: usize, map: &[usize]) -> Circuit {
        assert_eq!(map.len(), self.n);
        let ops = self
            .ops
            .iter()
            .map(|o| match o {
                Op::Gate(g) => Op::Gate(g.remap(map)),
                Op::Channel(c) => Op::Channel(c.remap(map)),
            })
            .collect();
        Circuit { n, ops }
    }

    /// Apply in place.
    pub fn apply_mut(&self, rho: &mut DensityMatrix) -> Result<()> {
        if rho.n != self.n {
            return Err(Error::InvalidConfig(format!("circuit on {} qubits applied to {}-qubit state", self.n, rho.n)));
        }
        let d = rho.dim();
        let data = rho.data.as_mut_slice();
        for op in &self.ops {
            match op {
                Op::Gate(g) => super::kernel::conjugate(data, d, &g.qubits, &g.matrix()),
                Op::Channel(c) => {
                    for co in &c.ops {
                        co.apply(data, d);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, input: &DensityMatrix) -> Result<DensityMatrix> {
        let mut out = input.clone();
        self.apply_mut(&mut out)?;
        Ok(out)
    }

    /// `U(|0><0|)`.
    pub fn run(&self) -> Result<DensityMatrix> {
        let mut rho = DensityMatrix::zero_state(self.n)?;
        self.apply_mut(&mut rho)?;
        Ok(rho)
    }

    /// Uncomputation block: gates reversed and inverted, each followed by the
    /// channels that followed it in `self`.
    pub fn reversed(&self) -> Circuit {
        let mut groups: Vec<(Option<Gate>, Vec<Channel>)> = Vec::new();
        let mut leading = Vec::new();
        for op in &self.ops {
            match op {
                Op::Gate(g) => groups.push((Some(g.clone()), Vec::new())),
                Op::Channel(c) => match groups.last_mut() {
                    Some(gr) => gr.1.push(c.clone()),
                    None => leading.push(c.clone()),
                },
            }
        }
        let mut out = Circuit::new(self.n);
        for (g, chs) in groups.into_iter().rev() {
            if let Some(g) = g {
                out.push(g.inverse());
            }
            for c in chs {
                out.push_channel(c);
            }
        }
        for c in leading {
            out.push_channel(c);
        }
        out
    }

    /// Adjoint process: operations in reverse order, each replaced by its
    /// adjoint-Kraus map.
    pub fn adjoint(&self) -> Circuit {
        let ops = self
            .ops
            .iter()
            .rev()
            .map(|o| match o {
                Op::Gate(g) => Op::Gate(g.inverse()),
                Op::Channel(c) => Op::Channel(c.dual()),
            })
            .collect();
        Circuit { n: self.n, ops }
    }

    /// Dual process of the uncomputation block; `dual().run()` is the dual state.
    pub fn dual(&self) -> Circuit {
        self.reversed().adjoint()
    }

    /// One gate or channel per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for op in &self.ops {
            match op {
                Op::Gate(g) => s.push_str(&format!("gate {g}\n")),
                Op::Channel(c) => s.push_str(&format!("  channel {c}\n")),
            }
        }
        s
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Layered hardware-efficient ansatz: per layer RX then RZ on every qubit and
/// CZ on the edges (even-indexed edges first), plus a closing rotation layer.
/// Layer `l` reads `params[2nl + q]` for RX and `params[2nl + n + q]` for RZ.
pub fn build_ansatz(n: usize, layers: usize, params: &[f64], edges: &[(usize, usize)]) -> Result<Circuit> {
    let want = 2 * n * (layers + 1);
    if params.len() != want {
        return Err(Error::InvalidConfig(format!("ansatz needs {want} parameters, got {}", params.len())));
    }
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n || a == b) {
        return Err(Error::InvalidConfig(format!("bad edge ({a}, {b})")));
    }
    let mut c = Circuit::new(n);
    let rot = |c: &mut Circuit, l: usize| {
        for q in 0..n {
            c.push(Gate::rx(q, params[2 * n * l + q]));
        }
        for q in 0..n {
            c.push(Gate::rz(q, params[2 * n * l + n + q]));
        }
    };
    for l in 0..layers {
        rot(&mut c, l);
        for parity in [0, 1] {
            for (i, &(a, b)) in edges.iter().enumerate() {
                if i % 2 == parity {
                    c.push(Gate::cz(a, b));
                }
            }
        }
    }
    rot(&mut c, layers);
    Ok(c)
}
