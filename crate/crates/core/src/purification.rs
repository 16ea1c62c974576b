//! Estimators for traces of products of noisy states and their duals.
//!
//! [`oracle_trace`] multiplies dense matrices. The remaining estimators build
//! the measurement gadgets explicitly (ancilla, controlled operations,
//! uncomputation and post-selection on `|0...0>`) and read the ancilla.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliString, PauliSum};
use crate::sim::state::trace_with_pauli;
use crate::sim::{attach_noise, cswap, Circuit, DensityMatrix, Gate, GateKind, NoiseModel, MAX_QUBITS};

const ZERO: C = C::new(0.0, 0.0);

/// One factor of an oracle product, optionally daggered.
#[derive(Clone, Copy, Debug)]
pub struct Factor<'a> {
    pub mat: &'a DMatrix<C>,
    pub dagger: bool,
}

impl<'a> Factor<'a> {
    pub fn new(mat: &'a DMatrix<C>) -> Self {
        Factor { mat, dagger: false }
    }
    pub fn dag(mat: &'a DMatrix<C>) -> Self {
        Factor { mat, dagger: true }
    }
}

/// `Tr[F_1 F_2 ... F_k O]` by dense multiplication.
pub fn oracle_trace(factors: &[Factor<'_>], obs: &PauliSum) -> Result<C> {
    let d = 1usize << obs.n;
    let mut prod = DMatrix::<C>::identity(d, d);
    for f in factors {
        if f.mat.nrows() != d || f.mat.ncols() != d {
            return Err(Error::InvalidConfig("factor dimension does not match observable".into()));
        }
        prod = if f.dagger { prod * f.mat.adjoint() } else { prod * f.mat };
    }
    Ok(obs.iter().map(|t| t.coeff * trace_with_pauli(&prod, &t.string)).sum())
}

/// `(bar * rho + rho * bar) / 2`.
pub fn symmetrized_product(rho: &DMatrix<C>, bar: &DMatrix<C>) -> DMatrix<C> {
    (bar * rho + rho * bar) * C::new(0.5, 0.0)
}

/// How the DSP numerator is read out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DspMode {
    /// Mid-circuit Z measurement, `p_{0,0} - p_{1,0}`.
    #[default]
    Direct,
    /// Ancilla-controlled observable, `<X (x) P0>`.
    Ancilla,
}

/// Noise applied to gates added by a gadget (not to the circuits being purified).
#[derive(Clone, Debug, Default)]
pub struct GadgetNoise {
    pub model: NoiseModel,
    pub seed: u64,
}

impl GadgetNoise {
    pub fn none() -> Self {
        GadgetNoise::default()
    }

    fn attach(&self, c: &Circuit) -> Result<Circuit> {
        if self.model.is_noiseless() {
            return Ok(c.clone());
        }
        attach_noise(c, &self.model, self.seed)
    }
}

/// Result of a DSP evaluation of a Pauli sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DspResult {
    /// `sum_h c_h Tr[(bar rho + rho bar)/2 P_h]`.
    pub numerator: f64,
    /// `Tr[bar rho]`.
    pub p0: f64,
    pub value: f64,
}

/// Gates `W` with `W O W^dagger = Z_t`: per-qubit basis change then CNOT fan-in onto `t`,
/// the last qubit in the support. Returns `(W, t)`.
pub fn clifford_to_z(p: &PauliString) -> (Vec<Gate>, usize) {
    let supp = p.support();
    let t = *supp.last().expect("non-identity Pauli");
    let mut gates = Vec::new();
    for &q in &supp {
        match p.axis(q) {
            Axis::X => gates.push(Gate::h(q)),
            Axis::Y => {
                gates.push(Gate::new(GateKind::Sdg, vec![q]));
                gates.push(Gate::h(q));
            }
            _ => {}
        }
    }
    for &q in &supp {
        if q != t {
            gates.push(Gate::cnot(q, t));
        }
    }
    (gates, t)
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n, MAX_QUBITS));
    }
    Ok(())
}

/// `|+><+| (x) rho` with the ancilla as the highest qubit.
fn with_ancilla(rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_size(rho.n + 1)?;
    let d = rho.dim();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for a in 0..2 {
        for b in 0..2 {
            for j in 0..d {
                for i in 0..d {
                    m[(a * d + i, b * d + j)] = rho.data[(i, j)] * 0.5;
                }
            }
        }
    }
    DensityMatrix::from_matrix(rho.n + 1, m)
}

/// `2 * sum_{i in kept} rho[(1, i), (0, i)]`, i.e. `<X (x) M> + i <Y (x) M>` for the
/// projector `M` onto the register indices accepted by `keep`.
fn ancilla_xy(rho: &DensityMatrix, keep: impl Fn(usize) -> bool) -> C {
    let d = rho.dim() / 2;
    let mut acc = ZERO;
    for i in 0..d {
        if keep(i) {
            acc += rho.data[(d + i, i)];
        }
    }
    acc * 2.0
}

fn basis_blocks(w: &[Gate], size: usize, gadget: &GadgetNoise) -> Result<(Circuit, Circuit)> {
    let mut fwd = Circuit::new(size);
    for g in w {
        fwd.push(g.clone());
    }
    let mut back = Circuit::new(size);
    for g in w.iter().rev() {
        back.push(g.inverse());
    }
    Ok((gadget.attach(&fwd)?, gadget.attach(&back)?))
}

/// Ancilla readout `<X (x) P0> + i <Y (x) P0>` of the indirect DSP circuit, which
/// equals `Tr[rho bar P]` for `rho` prepared by `forward` and `bar` defined by `rev`.
pub fn dsp_ancilla_xy(rho: &DensityMatrix, rev: &Circuit, p: &PauliString, gadget: &GadgetNoise) -> Result<C> {
    let n = rho.n;
    if p.is_identity() {
        return Ok(C::new(rev.apply(rho)?.data[(0, 0)].re, 0.0));
    }
    let (w, t) = clifford_to_z(p);
    let (wc, wdg) = basis_blocks(&w, n + 1, gadget)?;
    let mut s = with_ancilla(rho)?;
    wc.apply_mut(&mut s)?;
    let mut cz = Circuit::new(n + 1);
    cz.push(Gate::cz(n, t));
    gadget.attach(&cz)?.apply_mut(&mut s)?;
    wdg.apply_mut(&mut s)?;
    rev.remap(n + 1, &(0..n).collect::<Vec<_>>()).apply_mut(&mut s)?;
    Ok(ancilla_xy(&s, |i| i == 0))
}

/// Numerator `Tr[(bar rho + rho bar)/2 P]` for one Pauli string, with `rho`
/// prepared by `forward` and `bar` defined by the uncomputation block `rev`.
pub fn dsp_numerator_pauli(
    rho: &DensityMatrix,
    rev: &Circuit,
    p: &PauliString,
    mode: DspMode,
    gadget: &GadgetNoise,
) -> Result<f64> {
    if mode == DspMode::Ancilla || p.is_identity() {
        return Ok(dsp_ancilla_xy(rho, rev, p, gadget)?.re);
    }
    let (w, t) = clifford_to_z(p);
    let (wc, wdg) = basis_blocks(&w, rho.n, gadget)?;
    let s = wc.apply(rho)?;
    let mut acc = 0.0;
    for b in 0..2usize {
        let mut branch = s.clone();
        let dim = branch.dim();
        for j in 0..dim {
            for i in 0..dim {
                if (i >> t) & 1 != b || (j >> t) & 1 != b {
                    branch.data[(i, j)] = ZERO;
                }
            }
        }
        wdg.apply_mut(&mut branch)?;
        rev.apply_mut(&mut branch)?;
        let p_b0 = branch.data[(0, 0)].re;
        acc += if b == 0 { p_b0 } else { -p_b0 };
    }
    Ok(acc)
}

/// DSP estimate `Tr[(bar rho + rho bar)/2 O] / Tr[bar rho]` from circuits.
pub fn dsp_expectation(c: &Circuit, obs: &PauliSum, mode: DspMode, gadget: &GadgetNoise) -> Result<DspResult> {
    dsp_expectation_pair(c, &c.reversed(), obs, mode, gadget)
}

/// As [`dsp_expectation`] with separate preparation and uncomputation blocks.
pub fn dsp_expectation_pair(
    forward: &Circuit,
    rev: &Circuit,
    obs: &PauliSum,
    mode: DspMode,
    gadget: &GadgetNoise,
) -> Result<DspResult> {
    if forward.n != obs.n || rev.n != obs.n {
        return Err(Error::InvalidConfig("observable and circuit sizes differ".into()));
    }
    let rho = forward.run()?;
    let p0 = rev.apply(&rho)?.data[(0, 0)].re;
    let mut num = 0.0;
    for t in obs.iter() {
        num += t.coeff.re * dsp_numerator_pauli(&rho, rev, &t.string, mode, gadget)?;
    }
    Ok(DspResult { numerator: num, p0, value: num / p0 })
}

/// Result of an ESD/VD evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EsdResult {
    /// `sum_h c_h Tr[rho^n P_h]` estimate.
    pub numerator: f64,
    /// `Tr[rho^n]` estimate.
    pub purity: f64,
    pub value: f64,
}

/// Controlled cyclic shift of `copies` registers of `w` qubits: register `k`
/// receives the content of register `k + 1`. Conditioned on `ctrl`.
fn controlled_shift(c: &mut Circuit, ctrl: usize, copies: usize, w: usize) {
    for k in 0..copies.saturating_sub(1) {
        for q in 0..w {
            for g in cswap(ctrl, k * w + q, (k + 1) * w + q) {
                c.push(g);
            }
        }
    }
}

/// `n` copies of `c` side by side.
fn copies_state(c: &Circuit, copies: usize, extra: usize) -> Result<DensityMatrix> {
    let w = c.n;
    let total = copies * w + extra;
    check_size(total)?;
    let mut s = DensityMatrix::zero_state(total)?;
    for k in 0..copies {
        let map: Vec<usize> = (0..w).map(|q| k * w + q).collect();
        c.remap(total, &map).apply_mut(&mut s)?;
    }
    Ok(s)
}

fn hadamard_on(s: &mut DensityMatrix, q: usize) -> Result<()> {
    let mut h = Circuit::new(s.n);
    h.push(Gate::h(q));
    h.apply_mut(s)
}

/// ESD/VD estimate `Tr[rho^n O] / Tr[rho^n]` with an ancilla, controlled-O on
/// the first copy and a controlled cyclic shift built from controlled-SWAPs.
pub fn esd_expectation(c: &Circuit, obs: &PauliSum, copies: usize, gadget: &GadgetNoise) -> Result<EsdResult> {
    if copies < 2 {
        return Err(Error::InvalidConfig("ESD needs at least two copies".into()));
    }
    if c.n != obs.n {
        return Err(Error::InvalidConfig("observable and circuit sizes differ".into()));
    }
    let w = c.n;
    let anc = copies * w;
    let mut base = copies_state(c, copies, 1)?;
    hadamard_on(&mut base, anc)?;
    let run = |p: &PauliString| -> Result<f64> {
        let mut g = Circuit::new(anc + 1);
        for q in p.support() {
            g.push(Gate::cpauli(anc, q, p.axis(q)));
        }
        controlled_shift(&mut g, anc, copies, w);
        let g = gadget.attach(&g)?;
        let mut s = base.clone();
        g.apply_mut(&mut s)?;
        Ok(ancilla_xy(&s, |_| true).re)
    };
    let purity = run(&PauliString::identity(w))?;
    let mut num = 0.0;
    for t in obs.iter() {
        num += t.coeff.re * run(&t.string)?;
    }
    Ok(EsdResult { numerator: num, purity, value: num / purity })
}

/// Resource-efficient purification with `copies` registers. Returns
/// `<X>` = `Tr[((bar rho)^n + (rho bar)^n)/2 O]`; with `drop_last_uncompute`
/// the last register is neither uncomputed nor post-selected and the return is
/// `<X> - i<Y>` = `Tr[rho (bar rho)^(n-1) O]`.
pub fn re_purification(c: &Circuit, copies: usize, obs: &PauliSum, drop_last_uncompute: bool) -> Result<C> {
    if copies == 0 {
        return Err(Error::InvalidConfig("need at least one copy".into()));
    }
    let w = c.n;
    let anc = copies * w;
    let mut base = copies_state(c, copies, 1)?;
    hadamard_on(&mut base, anc)?;
    let rev = c.reversed();
    let undone = if drop_last_uncompute { copies - 1 } else { copies };
    let mut tail = Circuit::new(anc + 1);
    for k in 0..undone {
        let map: Vec<usize> = (0..w).map(|q| k * w + q).collect();
        tail.extend(&rev.remap(anc + 1, &map));
    }
    let mask = (1usize << (undone * w)) - 1;
    let mut out = ZERO;
    for t in obs.iter() {
        let mut g = Circuit::new(anc + 1);
        for q in t.string.support() {
            g.push(Gate::cpauli(anc, q, t.string.axis(q)));
        }
        controlled_shift(&mut g, anc, copies, w);
        let mut s = base.clone();
        g.apply_mut(&mut s)?;
        tail.apply_mut(&mut s)?;
        let xy = ancilla_xy(&s, |i| i & mask == 0);
        out += t.coeff * if drop_last_uncompute { xy.conj() } else { C::new(xy.re, 0.0) };
    }
    Ok(out)
}

/// Reference to a factor of a general product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorRef {
    /// `i`-th factor of the left block (1-based), appearing daggered.
    Left(usize),
    /// `i`-th factor of the right block (1-based).
    Right(usize),
    /// The extra state inserted between the blocks.
    A,
}

/// One element of the cyclic product: `X sigma Y^dagger`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainElement {
    pub factor: FactorRef,
    /// Uses the dual state of the factor (`tau bar`).
    pub barred: bool,
    pub dagger: bool,
}

/// Unitary placed on a register by a controlled gadget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitaryRef {
    V(FactorRef),
    W(FactorRef),
    Vdg(FactorRef),
    Wdg(FactorRef),
    Observable,
}

/// Work assigned to one register of a general circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannedRegister {
    /// Factor whose preparation circuit runs first on the register.
    pub input: FactorRef,
    /// Factor whose uncomputation block runs last (then post-selection), if any.
    pub output: Option<FactorRef>,
    /// Applied when the ancilla reads 1, in time order, before the controlled shift.
    pub branch1: Vec<UnitaryRef>,
    /// Applied when the ancilla reads 0, in time order.
    pub branch0: Vec<UnitaryRef>,
}

/// Ancilla readout combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combination {
    X,
    XPlusIY,
    XMinusIY,
}

/// Circuit schedule for `Tr[(tau_n^dg ... tau_1^dg) [A] (tau_1 ... tau_n') O]`
/// with alternating dual factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitPlan {
    pub n_left: usize,
    pub n_right: usize,
    pub with_a: bool,
    pub copies: usize,
    pub chain: Vec<ChainElement>,
    pub registers: Vec<PlannedRegister>,
    /// Per register: post-selected on `|0...0>`.
    pub postselect: Vec<bool>,
    pub combination: Combination,
}

impl CircuitPlan {
    /// The product being estimated, e.g. `Tr[t1^dg t1~ O]` (`~` marks a dual factor).
    pub fn expression(&self) -> String {
        let mut s = String::from("Tr[");
        for e in &self.chain {
            let name = match e.factor {
                FactorRef::Left(i) => format!("L{i}"),
                FactorRef::Right(i) => format!("R{i}"),
                FactorRef::A => "A".into(),
            };
            s.push_str(&name);
            if e.barred {
                s.push('~');
            }
            if e.dagger {
                s.push_str("^dg");
            }
            s.push(' ');
        }
        s.push_str("O]");
        s
    }
}

impl fmt::Display for CircuitPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} copies={} combination={:?}", self.expression(), self.copies, self.combination)?;
        for (r, reg) in self.registers.iter().enumerate() {
            writeln!(f, "  reg{r}: in={:?} out={:?} c1={:?} c0={:?}", reg.input, reg.output, reg.branch1, reg.branch0)?;
        }
        Ok(())
    }
}

/// Time-ordered gate references realising `Y^dagger [O] X` for element pair (prev, next).
fn connector(prev: &ChainElement, with_o: bool, next: &ChainElement) -> Vec<UnitaryRef> {
    // element = X sigma Y^dg with (X, Y) = (V, W), or (W, V) when daggered; A has X = Y = I
    let x_of = |e: &ChainElement| match (e.factor, e.dagger) {
        (FactorRef::A, _) => None,
        (f, false) => Some(UnitaryRef::V(f)),
        (f, true) => Some(UnitaryRef::W(f)),
    };
    let ydg_of = |e: &ChainElement| match (e.factor, e.dagger) {
        (FactorRef::A, _) => None,
        (f, false) => Some(UnitaryRef::Wdg(f)),
        (f, true) => Some(UnitaryRef::Vdg(f)),
    };
    let mut v = Vec::new();
    v.extend(x_of(next));
    if with_o {
        v.push(UnitaryRef::Observable);
    }
    v.extend(ydg_of(prev));
    v
}

fn invert_refs(v: &[UnitaryRef]) -> Vec<UnitaryRef> {
    v.iter()
        .rev()
        .map(|u| match *u {
            UnitaryRef::V(f) => UnitaryRef::Vdg(f),
            UnitaryRef::W(f) => UnitaryRef::Wdg(f),
            UnitaryRef::Vdg(f) => UnitaryRef::V(f),
            UnitaryRef::Wdg(f) => UnitaryRef::W(f),
            UnitaryRef::Observable => UnitaryRef::Observable,
        })
        .collect()
}

/// Plan the general circuit. The cyclic chain alternates prepared states and
/// dual states starting from `A` (or from `tau_n^dg`); when the chain length
/// is odd the single pair of adjacent prepared states closes the cycle, and
/// the register holding the first of them is not post-selected.
pub fn plan_general(n_left: usize, n_right: usize, with_a: bool) -> Result<CircuitPlan> {
    if n_left == 0 || n_right == 0 {
        return Err(Error::InvalidConfig("both blocks need at least one factor".into()));
    }
    let mut chain: Vec<ChainElement> = Vec::new();
    for i in (1..=n_left).rev() {
        chain.push(ChainElement { factor: FactorRef::Left(i), barred: false, dagger: true });
    }
    if with_a {
        chain.push(ChainElement { factor: FactorRef::A, barred: false, dagger: false });
    }
    for i in 1..=n_right {
        chain.push(ChainElement { factor: FactorRef::Right(i), barred: false, dagger: false });
    }
    let k = chain.len();
    let anchor = if with_a { n_left } else { 0 };
    for (i, e) in chain.iter_mut().enumerate() {
        e.barred = (i + k - anchor) % k % 2 == 1;
    }
    // walk the rotated chain; O sits between chain[k-1] and chain[0]
    let at = |t: usize| (anchor + t) % k;
    let o_after = |t: usize| at(t) == k - 1;
    struct Reg {
        input_t: usize,
        output_t: Option<usize>,
    }
    let mut regs: Vec<Reg> = Vec::new();
    let mut t = 0;
    while t < k {
        if t + 1 < k && chain[at(t + 1)].barred {
            regs.push(Reg { input_t: t, output_t: Some(t + 1) });
            t += 2;
        } else {
            regs.push(Reg { input_t: t, output_t: None });
            t += 1;
        }
    }
    let m = regs.len();
    let mut registers = Vec::with_capacity(m);
    for (r, reg) in regs.iter().enumerate() {
        let input = chain[at(reg.input_t)];
        let prev_reg = &regs[(r + m - 1) % m];
        let prev_t = prev_reg.output_t.unwrap_or(prev_reg.input_t);
        let branch1 = connector(&chain[at(prev_t)], o_after(prev_t), &input);
        let branch0 = match reg.output_t {
            Some(ot) => invert_refs(&connector(&input, o_after(reg.input_t), &chain[at(ot)])),
            None => Vec::new(),
        };
        registers.push(PlannedRegister {
            input: input.factor,
            output: reg.output_t.map(|ot| chain[at(ot)].factor),
            branch1,
            branch0,
        });
    }
    let postselect = registers.iter().map(|r| r.output.is_some()).collect();
    Ok(CircuitPlan {
        n_left,
        n_right,
        with_a,
        copies: m,
        chain,
        registers,
        postselect,
        combination: Combination::XPlusIY,
    })
}

/// A factor `tau = V rho W^dagger` of a general product.
#[derive(Clone, Debug)]
pub struct GeneralFactor {
    /// Prepares `rho`; its uncomputation block defines the dual state.
    pub circuit: Circuit,
    pub v: Vec<Gate>,
    pub w: Vec<Gate>,
}

impl GeneralFactor {
    pub fn plain(circuit: Circuit) -> Self {
        GeneralFactor { circuit, v: Vec::new(), w: Vec::new() }
    }
}

/// Simulate the planned circuit and return `<X> + i<Y>`, which equals the
/// cyclic product named by [`CircuitPlan::expression`].
pub fn execute_plan(
    plan: &CircuitPlan,
    left: &[GeneralFactor],
    right: &[GeneralFactor],
    a: Option<&Circuit>,
    obs: &PauliSum,
    gadget: &GadgetNoise,
) -> Result<C> {
    if left.len() != plan.n_left || right.len() != plan.n_right || a.is_some() != plan.with_a {
        return Err(Error::InvalidConfig("factors do not match the plan".into()));
    }
    let w = obs.n;
    let m = plan.copies;
    let anc = m * w;
    check_size(anc + 1)?;
    let factor = |f: FactorRef| -> &GeneralFactor {
        match f {
            FactorRef::Left(i) => &left[i - 1],
            FactorRef::Right(i) => &right[i - 1],
            FactorRef::A => unreachable!("A has no unitaries"),
        }
    };
    let mut prep = Circuit::new(anc + 1);
    let mut tail = Circuit::new(anc + 1);
    for (r, reg) in plan.registers.iter().enumerate() {
        let map: Vec<usize> = (0..w).map(|q| r * w + q).collect();
        let c_in = match reg.input {
            FactorRef::A => a.expect("plan uses A"),
            f => &factor(f).circuit,
        };
        if c_in.n != w {
            return Err(Error::InvalidConfig("factor register size differs from observable".into()));
        }
        prep.extend(&c_in.remap(anc + 1, &map));
        if let Some(out) = reg.output {
            tail.extend(&factor(out).circuit.reversed().remap(anc + 1, &map));
        }
    }
    let mut base = prep.run()?;
    hadamard_on(&mut base, anc)?;
    let mut total = ZERO;
    for t in obs.iter() {
        let mut g = Circuit::new(anc + 1);
        for (r, reg) in plan.registers.iter().enumerate() {
            let map: Vec<usize> = (0..w).map(|q| r * w + q).collect();
            for (on, refs) in [(true, &reg.branch1), (false, &reg.branch0)] {
                for u in refs.iter() {
                    let gates: Vec<Gate> = match *u {
                        UnitaryRef::V(f) => factor(f).v.clone(),
                        UnitaryRef::W(f) => factor(f).w.clone(),
                        UnitaryRef::Vdg(f) => factor(f).v.iter().rev().map(Gate::inverse).collect(),
                        UnitaryRef::Wdg(f) => factor(f).w.iter().rev().map(Gate::inverse).collect(),
                        UnitaryRef::Observable => {
                            t.string.support().into_iter().map(|q| Gate::pauli(q, t.string.axis(q))).collect()
                        }
                    };
                    for gate in gates {
                        let mut qs = vec![anc];
                        qs.extend(gate.qubits.iter().map(|&q| map[q]));
                        g.push(Gate::new(GateKind::Controlled { on, base: Box::new(gate.kind.clone()) }, qs));
                    }
                }
            }
        }
        controlled_shift(&mut g, anc, m, w);
        let g = gadget.attach(&g)?;
        let mut s = base.clone();
        g.apply_mut(&mut s)?;
        tail.apply_mut(&mut s)?;
        let mut mask = 0usize;
        for (r, &ps) in plan.postselect.iter().enumerate() {
            if ps {
                mask |= ((1usize << w) - 1) << (r * w);
            }
        }
        total += t.coeff * ancilla_xy(&s, |i| i & mask == 0);
    }
    Ok(match plan.combination {
        Combination::X => C::new(total.re, 0.0),
        Combination::XPlusIY => total,
        Combination::XMinusIY => total.conj(),
    })
}
