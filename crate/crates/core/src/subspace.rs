//! Generalized-eigenvalue matrices `(S, H)` for the power, fault and
//! divide-and-conquer subspaces, expressed over a ledger of measurement queries.
//!
//! Every matrix element is a polynomial in query values (a constant plus
//! coefficient-weighted products of per-block expectation values). A query is
//! one (prepared state, Pauli observable, readout) triple. Building a subspace
//! first produces a [`QueryPlan`]; evaluating the plan on a backend fills in
//! the values and single-shot variances.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum, SystemPartition};
use crate::purification::{dsp_ancilla_xy, GadgetNoise};
use crate::shotnoise::var_product;
use crate::sim::state::trace_pauli_sandwich;
use crate::sim::{attach_noise, trace_with_pauli, Circuit, DensityMatrix, NoiseModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceKind {
    Power,
    Fault,
    #[serde(rename = "dc", alias = "divide-and-conquer")]
    DivideAndConquer,
}

impl SubspaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SubspaceKind::Power => "power",
            SubspaceKind::Fault => "fault",
            SubspaceKind::DivideAndConquer => "dc",
        }
    }
}

/// Which subspace to build and how many basis elements it has.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceSpec {
    pub kind: SubspaceKind,
    pub m: usize,
    /// Noise amplification factors (fault only).
    pub lambdas: Vec<f64>,
    /// Block structure (dc only).
    pub partition: Option<SystemPartition>,
}

impl SubspaceSpec {
    pub fn power(m: usize) -> Self {
        SubspaceSpec { kind: SubspaceKind::Power, m, lambdas: Vec::new(), partition: None }
    }

    /// Fault subspace with `lambda_k = k`.
    pub fn fault(m: usize) -> Self {
        Self::fault_with((1..=m).map(|k| k as f64).collect())
    }

    pub fn fault_with(lambdas: Vec<f64>) -> Self {
        SubspaceSpec { kind: SubspaceKind::Fault, m: lambdas.len(), lambdas, partition: None }
    }

    pub fn dc(m: usize, partition: SystemPartition) -> Self {
        SubspaceSpec { kind: SubspaceKind::DivideAndConquer, m, lambdas: Vec::new(), partition: Some(partition) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("subspace count must be at least 1".into()));
        }
        match self.kind {
            SubspaceKind::Fault => {
                if self.lambdas.len() != self.m {
                    return Err(Error::InvalidConfig("need one amplification factor per subspace".into()));
                }
                if self.lambdas.iter().any(|&l| !(l >= 1.0)) || self.lambdas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidConfig("amplification factors must be >= 1 and ascending".into()));
                }
            }
            SubspaceKind::DivideAndConquer => {
                if self.partition.is_none() {
                    return Err(Error::InvalidConfig("dc subspace needs a partition".into()));
                }
            }
            SubspaceKind::Power => {}
        }
        Ok(())
    }
}

/// Product used inside the DSP queries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convolution {
    /// `(bar rho rho + rho bar rho) / 2`.
    #[default]
    Symmetric,
    /// `bar rho_out rho_in`, read as `<X> - i<Y>` (fault subspace only).
    Asymmetric,
}

/// State used for the first row and column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// `(rho + bar rho) / 2`.
    #[default]
    Symmetrized,
    /// `rho` alone.
    RhoOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Dense traces of state products.
    #[default]
    Oracle,
    /// Simulated ancilla DSP circuits (noiseless gadgets).
    Circuit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub convolution: Convolution,
    pub boundary: BoundaryMode,
    pub backend: Backend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateRole {
    /// Direct Pauli measurement of a single state.
    Boundary,
    /// DSP circuit with preparation `input` and uncomputation of `output`.
    Dsp,
}

/// A state queries are measured on.
#[derive(Clone, Debug)]
pub struct PreparedState {
    pub id: String,
    pub role: StateRole,
    pub input: Arc<Circuit>,
    pub output: Arc<Circuit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Readout {
    Direct,
    /// Ancilla `<X (x) P0>`.
    X,
    /// Ancilla `<Y (x) P0>`.
    Y,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryKey {
    pub state: usize,
    pub pauli: PauliString,
    pub readout: Readout,
}

/// `constant + sum_t coeff_t * prod_{q in t} value_q`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElementExpr {
    pub constant: C,
    pub terms: Vec<(C, Vec<usize>)>,
}

impl ElementExpr {
    pub fn eval(&self, values: &[f64]) -> C {
        self.terms.iter().fold(self.constant, |acc, (c, qs)| acc + c * qs.iter().map(|&q| values[q]).product::<f64>())
    }

    /// Single-shot variance, treating distinct factors of a product as independent.
    pub fn variance(&self, values: &[f64], vars: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, qs)| {
                let (_, v) =
                    qs.iter().fold((1.0, 0.0), |(m, v), &q| (m * values[q], var_product(m, v, values[q], vars[q])));
                c.norm_sqr() * v
            })
            .sum()
    }

    /// Number of query references (a product of `k` factors counts `k`).
    pub fn references(&self) -> usize {
        self.terms.iter().map(|(_, qs)| qs.len()).sum()
    }
}

/// Element expression before query keys are numbered.
#[derive(Clone, Debug, Default)]
struct RawExpr {
    constant: C,
    terms: BTreeMap<Vec<QueryKey>, C>,
}

impl RawExpr {
    fn add(&mut self, c: C, mut keys: Vec<QueryKey>) {
        if keys.is_empty() {
            self.constant += c;
            return;
        }
        keys.sort();
        *self.terms.entry(keys).or_insert(C::new(0.0, 0.0)) += c;
    }

    fn scale(mut self, s: C) -> Self {
        self.constant *= s;
        for c in self.terms.values_mut() {
            *c *= s;
        }
        self
    }

    fn conj(mut self) -> Self {
        self.constant = self.constant.conj();
        for c in self.terms.values_mut() {
            *c = c.conj();
        }
        self
    }

    fn merge(mut self, other: RawExpr) -> Self {
        self.constant += other.constant;
        for (k, c) in other.terms {
            self.add(c, k);
        }
        self
    }
}

/// Enumerated queries and element expressions for one subspace.
#[derive(Clone, Debug)]
pub struct QueryPlan {
    pub kind: SubspaceKind,
    pub m: usize,
    pub states: Vec<PreparedState>,
    pub queries: Vec<QueryKey>,
    /// Upper triangle (row-major, `j >= i`) of `S`.
    pub s_expr: Vec<ElementExpr>,
    pub h_expr: Vec<ElementExpr>,
}

pub fn upper_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < m);
    i * m - i * (i + 1) / 2 + j
}

impl QueryPlan {
    fn elements(&self) -> impl Iterator<Item = &ElementExpr> {
        self.s_expr.iter().chain(&self.h_expr)
    }

    /// Query count `Q`: unique queries with reuse, total references without.
    pub fn count(&self, reuse: bool) -> usize {
        if reuse {
            self.reference_counts().iter().filter(|&&r| r > 0).count()
        } else {
            self.elements().map(|e| e.references()).sum()
        }
    }

    /// How many element terms reference each query.
    pub fn reference_counts(&self) -> Vec<usize> {
        let mut refs = vec![0; self.queries.len()];
        for e in self.elements() {
            for (_, qs) in &e.terms {
                for &q in qs {
                    refs[q] += 1;
                }
            }
        }
        refs
    }

    pub fn state_label(&self, key: &QueryKey) -> String {
        let id = &self.states[key.state].id;
        match key.readout {
            Readout::Y => format!("{id}:y"),
            _ => id.clone(),
        }
    }

    /// `state_id,axes,refs`.
    pub fn to_csv(&self) -> String {
        let refs = self.reference_counts();
        let mut s = String::from("state_id,axes,refs\n");
        for (k, r) in self.queries.iter().zip(refs) {
            let _ = writeln!(s, "{},{},{}", self.state_label(k), k.pauli, r);
        }
        s
    }
}

fn fingerprint(c: &Circuit) -> String {
    let mut h = Sha256::new();
    h.update(c.n.to_le_bytes());
    h.update(c.dump().as_bytes());
    h.finalize().iter().take(5).map(|b| format!("{b:02x}")).collect()
}

/// Deduplicates prepared states by content.
#[derive(Default)]
struct Registry {
    states: Vec<PreparedState>,
    index: HashMap<String, usize>,
}

impl Registry {
    fn insert(&mut self, role: StateRole, input: &Arc<Circuit>, output: &Arc<Circuit>) -> usize {
        let id = match role {
            StateRole::Boundary => format!("bnd-{}", fingerprint(input)),
            StateRole::Dsp => format!("dsp-{}-{}", fingerprint(input), fingerprint(output)),
        };
        if let Some(&k) = self.index.get(&id) {
            return k;
        }
        self.states.push(PreparedState { id: id.clone(), role, input: input.clone(), output: output.clone() });
        self.index.insert(id, self.states.len() - 1);
        self.states.len() - 1
    }
}

fn finish(kind: SubspaceKind, m: usize, reg: Registry, s_raw: Vec<RawExpr>, h_raw: Vec<RawExpr>) -> QueryPlan {
    let mut keys: Vec<QueryKey> = s_raw.iter().chain(&h_raw).flat_map(|e| e.terms.keys().flatten().cloned()).collect();
    keys.sort();
    keys.dedup();
    let pos: HashMap<&QueryKey, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let convert = |raw: &[RawExpr]| -> Vec<ElementExpr> {
        raw.iter()
            .map(|e| ElementExpr {
                constant: e.constant,
                terms: e
                    .terms
                    .iter()
                    .filter(|(_, c)| c.norm() > 0.0)
                    .map(|(k, c)| (*c, k.iter().map(|q| pos[q]).collect()))
                    .collect(),
            })
            .collect()
    };
    let s_expr = convert(&s_raw);
    let h_expr = convert(&h_raw);
    QueryPlan { kind, m, states: reg.states, queries: keys, s_expr, h_expr }
}

/// `Tr[H]`, available symbolically.
fn trace_sum(h: &PauliSum) -> C {
    h.coeff(&PauliString::identity(h.n)) * (1u64 << h.n) as f64
}

/// Power-type construction over a product of blocks: `{I} U {(x)_l rho_l H^{k-2}}`.
/// A single block covering all qubits is the power subspace.
fn plan_product(
    kind: SubspaceKind,
    m: usize,
    h: &PauliSum,
    partition: &SystemPartition,
    blocks: &[Arc<Circuit>],
    opts: &BuildOptions,
) -> Result<QueryPlan> {
    if opts.convolution == Convolution::Asymmetric {
        return Err(Error::InvalidConfig("the asymmetric convolution applies to the fault subspace only".into()));
    }
    if blocks.len() != partition.blocks.len() {
        return Err(Error::InvalidPartition("one circuit per block required".into()));
    }
    for (b, c) in partition.blocks.iter().zip(blocks) {
        if b.len() != c.n {
            return Err(Error::InvalidPartition(format!("block of {} qubits given a {}-qubit circuit", b.len(), c.n)));
        }
    }
    let mut reg = Registry::default();
    let bnd: Vec<usize> = blocks.iter().map(|c| reg.insert(StateRole::Boundary, c, c)).collect();
    let dsp: Vec<usize> = blocks.iter().map(|c| reg.insert(StateRole::Dsp, c, c)).collect();
    let kmax = (2 * m).saturating_sub(3).max(m.saturating_sub(1));
    let powers = h.powers(kmax);
    let boundary = |k: usize| {
        let mut e = RawExpr::default();
        for t in powers[k].factorize(partition) {
            let keys = t
                .factors
                .iter()
                .zip(&bnd)
                .filter(|(p, _)| !p.is_identity())
                .map(|(p, &state)| QueryKey { state, pauli: *p, readout: Readout::Direct })
                .collect();
            e.add(t.coeff, keys);
        }
        e
    };
    let inner = |k: usize| {
        let mut e = RawExpr::default();
        for t in powers[k].factorize(partition) {
            let keys = t
                .factors
                .iter()
                .zip(&dsp)
                .map(|(p, &state)| QueryKey { state, pauli: *p, readout: Readout::X })
                .collect();
            e.add(t.coeff, keys);
        }
        e
    };
    let mut s_raw = Vec::new();
    let mut h_raw = Vec::new();
    for i in 0..m {
        for j in i..m {
            let (s, hh) = if i == 0 && j == 0 {
                let mut s = RawExpr::default();
                s.add(C::new((1u64 << h.n) as f64, 0.0), Vec::new());
                let mut hh = RawExpr::default();
                hh.add(trace_sum(h), Vec::new());
                (s, hh)
            } else if i == 0 {
                (boundary(j - 1), boundary(j))
            } else {
                (inner(i + j - 2), inner(i + j - 1))
            };
            s_raw.push(s);
            h_raw.push(hh);
        }
    }
    Ok(finish(kind, m, reg, s_raw, h_raw))
}

/// Power subspace `{I} U {rho H^{k-2}}` for a noisy circuit `noisy`.
pub fn plan_power(m: usize, h: &PauliSum, noisy: &Circuit, opts: &BuildOptions) -> Result<QueryPlan> {
    if noisy.n != h.n {
        return Err(Error::InvalidConfig("Hamiltonian and circuit sizes differ".into()));
    }
    plan_product(SubspaceKind::Power, m, h, &SystemPartition::whole(h.n), &[Arc::new(noisy.clone())], opts)
}

/// Divide-and-conquer subspace with one noisy circuit per partition block.
pub fn plan_dc(
    m: usize,
    h: &PauliSum,
    partition: &SystemPartition,
    noisy_blocks: &[Circuit],
    opts: &BuildOptions,
) -> Result<QueryPlan> {
    if partition.n != h.n {
        return Err(Error::InvalidPartition("partition and Hamiltonian sizes differ".into()));
    }
    let blocks: Vec<Arc<Circuit>> = noisy_blocks.iter().map(|c| Arc::new(c.clone())).collect();
    plan_product(SubspaceKind::DivideAndConquer, m, h, partition, &blocks, opts)
}

/// Fault subspace `{rho(lambda_k eps)}` from already amplified circuits.
/// `S_ij` and `H_ij` average the `(in=i, out=j)` and `(in=j, out=i)` circuits so
/// the pencil is Hermitian.
pub fn plan_fault(h: &PauliSum, amplified: &[Circuit], opts: &BuildOptions) -> Result<QueryPlan> {
    let m = amplified.len();
    if m == 0 {
        return Err(Error::InvalidConfig("fault subspace needs at least one circuit".into()));
    }
    if amplified.iter().any(|c| c.n != h.n) {
        return Err(Error::InvalidConfig("Hamiltonian and circuit sizes differ".into()));
    }
    let circuits: Vec<Arc<Circuit>> = amplified.iter().map(|c| Arc::new(c.clone())).collect();
    let mut reg = Registry::default();
    let mut pair = vec![vec![0; m]; m];
    for (i, row) in pair.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = reg.insert(StateRole::Dsp, &circuits[i], &circuits[j]);
        }
    }
    // Tr[bar rho_out rho_in O] for one ordered pair, symmetric or asymmetric
    let overlap = |i: usize, j: usize, obs: &PauliSum| {
        let mut e = RawExpr::default();
        for t in obs.iter() {
            let key = |readout| QueryKey { state: pair[i][j], pauli: t.string, readout };
            e.add(t.coeff, vec![key(Readout::X)]);
            if opts.convolution == Convolution::Asymmetric && !t.string.is_identity() {
                e.add(t.coeff * C::new(0.0, -1.0), vec![key(Readout::Y)]);
            }
        }
        e
    };
    let unit = PauliSum::identity(h.n);
    let mut s_raw = Vec::new();
    let mut h_raw = Vec::new();
    let half = C::new(0.5, 0.0);
    for i in 0..m {
        for j in i..m {
            for (obs, out) in [(&unit, &mut s_raw), (h, &mut h_raw)] {
                let e = overlap(i, j, obs).merge(overlap(j, i, obs).conj()).scale(half);
                out.push(e);
            }
        }
    }
    Ok(finish(SubspaceKind::Fault, m, reg, s_raw, h_raw))
}

/// Noisy circuits `rho(lambda_k eps)` sharing one noise realization seed.
pub fn amplified_circuits(ansatz: &Circuit, noise: &NoiseModel, lambdas: &[f64], seed: u64) -> Result<Vec<Circuit>> {
    lambdas.iter().map(|&l| attach_noise(ansatz, &noise.amplify(l)?, seed)).collect()
}

/// Plan for any subspace kind. `ansatz` is the whole-system circuit (power and
/// fault); `blocks` holds one circuit per partition block (dc).
pub fn plan_queries(
    spec: &SubspaceSpec,
    h: &PauliSum,
    ansatz: Option<&Circuit>,
    blocks: &[Circuit],
    noise: &NoiseModel,
    seed: u64,
    opts: &BuildOptions,
) -> Result<QueryPlan> {
    spec.validate()?;
    let need = || ansatz.ok_or_else(|| Error::InvalidConfig("subspace needs a whole-system ansatz".into()));
    match spec.kind {
        SubspaceKind::Power => plan_power(spec.m, h, &attach_noise(need()?, noise, seed)?, opts),
        SubspaceKind::Fault => plan_fault(h, &amplified_circuits(need()?, noise, &spec.lambdas, seed)?, opts),
        SubspaceKind::DivideAndConquer => {
            let part = spec.partition.as_ref().expect("validated");
            let noisy: Vec<Circuit> = blocks.iter().map(|c| attach_noise(c, noise, seed)).collect::<Result<_>>()?;
            plan_dc(spec.m, h, part, &noisy, opts)
        }
    }
}

/// Matrices, variances and the evaluated query ledger.
#[derive(Clone, Debug)]
pub struct SubspaceMatrices {
    pub plan: QueryPlan,
    pub s: DMatrix<C>,
    pub h: DMatrix<C>,
    pub var_s: DMatrix<f64>,
    pub var_h: DMatrix<f64>,
    /// Noise-free (in the shot sense) value of each query.
    pub values: Vec<f64>,
    /// Single-shot variance of each query.
    pub vars: Vec<f64>,
}

impl SubspaceMatrices {
    pub fn m(&self) -> usize {
        self.plan.m
    }

    /// Rebuild `(S, H)` from query values; the lower triangle mirrors the upper.
    pub fn assemble(&self, values: &[f64]) -> (DMatrix<C>, DMatrix<C>) {
        assemble(&self.plan, |e| e.eval(values))
    }

    /// `i,j,re,im,var` with 1-based indices.
    pub fn matrix_csv(&self, which: char) -> String {
        let (mat, var) = if which == 'S' { (&self.s, &self.var_s) } else { (&self.h, &self.var_h) };
        let mut s = String::from("i,j,re,im,var\n");
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                let z = mat[(i, j)];
                let _ = writeln!(s, "{},{},{:e},{:e},{:e}", i + 1, j + 1, z.re, z.im, var[(i, j)]);
            }
        }
        s
    }

    /// `state_id,axes,value,var,shots` for queries that are referenced.
    pub fn ledger_csv(&self, shots_per_query: Option<f64>) -> String {
        let refs = self.plan.reference_counts();
        let mut s = String::from("state_id,axes,value,var,shots\n");
        for (q, k) in self.plan.queries.iter().enumerate() {
            if refs[q] == 0 {
                continue;
            }
            let shots = shots_per_query.map_or_else(|| "inf".to_string(), |x| format!("{x:e}"));
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{}",
                self.plan.state_label(k),
                k.pauli,
                self.values[q],
                self.vars[q],
                shots
            );
        }
        s
    }
}

fn assemble(plan: &QueryPlan, f: impl Fn(&ElementExpr) -> C) -> (DMatrix<C>, DMatrix<C>) {
    let m = plan.m;
    let mut s = DMatrix::zeros(m, m);
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let k = upper_index(m, i, j);
            for (mat, expr) in [(&mut s, &plan.s_expr[k]), (&mut h, &plan.h_expr[k])] {
                let mut z = f(expr);
                if i == j {
                    z = C::new(z.re, 0.0);
                }
                mat[(i, j)] = z;
                mat[(j, i)] = z.conj();
            }
        }
    }
    (s, h)
}

/// Dense data needed to evaluate queries on one prepared state.
enum Cached {
    Boundary(DMatrix<C>),
    Dsp { rho: DensityMatrix, bar: DMatrix<C>, product: DMatrix<C>, norm: f64, rev: Circuit },
}

fn prepare(state: &PreparedState, opts: &BuildOptions) -> Result<Cached> {
    let rho = state.input.run()?;
    match state.role {
        StateRole::Boundary => {
            let mat = match opts.boundary {
                BoundaryMode::RhoOnly => rho.data,
                BoundaryMode::Symmetrized => {
                    let bar = state.input.dual().run()?;
                    (rho.data + bar.data) * C::new(0.5, 0.0)
                }
            };
            Ok(Cached::Boundary(mat))
        }
        StateRole::Dsp => {
            let bar = state.output.dual().run()?.data;
            let product = &rho.data * &bar;
            let norm = product.trace().re;
            Ok(Cached::Dsp { rho, bar, product, norm, rev: state.output.reversed() })
        }
    }
}

fn evaluate_query(cache: &Cached, key: &QueryKey, backend: Backend) -> Result<(f64, f64)> {
    match cache {
        Cached::Boundary(mat) => {
            let v = trace_with_pauli(mat, &key.pauli).re;
            Ok((v, (1.0 - v * v).max(0.0)))
        }
        Cached::Dsp { rho, bar, product, norm, rev } => {
            // Tr[rho bar P] = <X> + i<Y>
            let t = match backend {
                Backend::Oracle => trace_with_pauli(product, &key.pauli),
                Backend::Circuit => dsp_ancilla_xy(rho, rev, &key.pauli, &GadgetNoise::none())?,
            };
            let v = if key.readout == Readout::Y { t.im } else { t.re };
            let second = 0.5 * (norm + trace_pauli_sandwich(&rho.data, &key.pauli, bar).re);
            Ok((v, (second - v * v).max(0.0)))
        }
    }
}

/// Evaluate every query of `plan` and assemble the matrices.
pub fn evaluate(plan: QueryPlan, opts: &BuildOptions) -> Result<SubspaceMatrices> {
    let caches: Vec<Cached> = plan.states.par_iter().map(|s| prepare(s, opts)).collect::<Result<_>>()?;
    let evaluated: Vec<(f64, f64)> =
        plan.queries.par_iter().map(|k| evaluate_query(&caches[k.state], k, opts.backend)).collect::<Result<_>>()?;
    let (values, vars): (Vec<f64>, Vec<f64>) = evaluated.into_iter().unzip();
    let (s, h) = assemble(&plan, |e| e.eval(&values));
    let m = plan.m;
    let mut var_s = DMatrix::zeros(m, m);
    let mut var_h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let k = upper_index(m, i, j);
            let vs = plan.s_expr[k].variance(&values, &vars);
            let vh = plan.h_expr[k].variance(&values, &vars);
            var_s[(i, j)] = vs;
            var_s[(j, i)] = vs;
            var_h[(i, j)] = vh;
            var_h[(j, i)] = vh;
        }
    }
    Ok(SubspaceMatrices { plan, s, h, var_s, var_h, values, vars })
}

pub fn build_power(m: usize, h: &PauliSum, noisy: &Circuit, opts: &BuildOptions) -> Result<SubspaceMatrices> {
    evaluate(plan_power(m, h, noisy, opts)?, opts)
}

pub fn build_fault(h: &PauliSum, amplified: &[Circuit], opts: &BuildOptions) -> Result<SubspaceMatrices> {
    evaluate(plan_fault(h, amplified, opts)?, opts)
}

pub fn build_dc(
    m: usize,
    h: &PauliSum,
    partition: &SystemPartition,
    noisy_blocks: &[Circuit],
    opts: &BuildOptions,
) -> Result<SubspaceMatrices> {
    evaluate(plan_dc(m, h, partition, noisy_blocks, opts)?, opts)
}

/// Build any subspace from a spec; see [`plan_queries`].
pub fn build(
    spec: &SubspaceSpec,
    h: &PauliSum,
    ansatz: Option<&Circuit>,
    blocks: &[Circuit],
    noise: &NoiseModel,
    seed: u64,
    opts: &BuildOptions,
) -> Result<SubspaceMatrices> {
    evaluate(plan_queries(spec, h, ansatz, blocks, noise, seed, opts)?, opts)
}
