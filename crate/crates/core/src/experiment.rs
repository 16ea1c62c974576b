//! Config-driven scenarios. Each scenario returns typed rows plus CSV tables;
//! grid points run in parallel and every random draw derives from the config seed.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost;
use crate::error::{Error, Result};
use crate::gevp::{self, GevpSolution, Window};
use crate::pauli::{build_ising, PauliSum, SystemPartition};
use crate::purification::{dsp_expectation, esd_expectation, symmetrized_product, DspMode, GadgetNoise};
use crate::shotnoise::{self, ShotConfig};
use crate::sim::{attach_noise, build_ansatz, trace_distance, trace_product, Circuit, NoiseModel, NoiseSpec};
use crate::subspace::{
    amplified_circuits, build_dc, build_fault, build_power, plan_dc, plan_fault, plan_power, BoundaryMode,
    BuildOptions, Convolution, QueryPlan, SubspaceKind, SubspaceMatrices,
};
use crate::vqe::{self, AnsatzSpec, VqeOptions};

/// Interaction graph of the Ising model and the ansatz entanglers.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// `(rows, cols)` for grid graphs, qubit `r * cols + c`.
    pub grid: Option<(usize, usize)>,
}

impl Graph {
    pub fn path(n: usize) -> Self {
        Graph { n, edges: (1..n).map(|i| (i - 1, i)).collect(), grid: None }
    }

    /// Nearest-neighbour grid: row edges first, then column edges.
    pub fn cluster(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 1..cols {
                edges.push((r * cols + c - 1, r * cols + c));
            }
        }
        for r in 1..rows {
            for c in 0..cols {
                edges.push(((r - 1) * cols + c, r * cols + c));
            }
        }
        Graph { n: rows * cols, edges, grid: Some((rows, cols)) }
    }

    /// `path-N`, `cluster-2d-8` (2x4) or `cluster-RxC`.
    pub fn named(name: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown graph '{name}'"));
        if let Some(n) = name.strip_prefix("path-") {
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            return Ok(Graph::path(n));
        }
        if name == "cluster-2d-8" {
            return Ok(Graph::cluster(2, 4));
        }
        if let Some((r, c)) = name.strip_prefix("cluster-").and_then(|s| s.split_once('x')) {
            let (r, c): (usize, usize) = (r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
            if r == 0 || c == 0 {
                return Err(bad());
            }
            return Ok(Graph::cluster(r, c));
        }
        Err(bad())
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        build_ising(self.n, &self.edges)
    }

    /// Edges inside `block`, relabelled to positions within the sorted block.
    pub fn induced(&self, block: &[usize]) -> Vec<(usize, usize)> {
        let pos = |q: usize| block.iter().position(|&b| b == q);
        self.edges.iter().filter_map(|&(a, b)| Some((pos(a)?, pos(b)?))).collect()
    }

    pub fn cut_edges(&self, part: &SystemPartition) -> usize {
        let block_of = |q: usize| part.blocks.iter().position(|b| b.contains(&q));
        self.edges.iter().filter(|&&(a, b)| block_of(a) != block_of(b)).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Named(String),
    Custom { n: usize, edges: Vec<(usize, usize)> },
}

impl GraphSpec {
    pub fn resolve(&self) -> Result<Graph> {
        match self {
            GraphSpec::Named(s) => Graph::named(s),
            GraphSpec::Custom { n, edges } => {
                build_ising(*n, edges)?;
                Ok(Graph { n: *n, edges: edges.clone(), grid: None })
            }
        }
    }
}

/// `halves` (first half / second half), `rows` (one block per grid row),
/// `squares` (pairs of adjacent grid columns), or explicit blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionSpec {
    Named(String),
    Blocks(Vec<Vec<usize>>),
}

impl PartitionSpec {
    pub fn resolve(&self, g: &Graph) -> Result<SystemPartition> {
        let blocks = match self {
            PartitionSpec::Blocks(b) => b.clone(),
            PartitionSpec::Named(name) => match (name.as_str(), g.grid) {
                ("halves", _) => {
                    let k = g.n.div_ceil(2);
                    vec![(0..k).collect(), (k..g.n).collect()]
                }
                ("whole", _) => vec![(0..g.n).collect()],
                ("rows", Some((r, c))) => (0..r).map(|i| (i * c..(i + 1) * c).collect()).collect(),
                ("squares", Some((r, c))) if c % 2 == 0 => {
                    (0..c / 2).map(|k| (0..r).flat_map(|i| [i * c + 2 * k, i * c + 2 * k + 1]).collect()).collect()
                }
                _ => return Err(Error::InvalidConfig(format!("partition '{name}' does not apply to this graph"))),
            },
        };
        SystemPartition::new(g.n, blocks)
    }
}

/// Noise family; the rate `p1` comes from the scenario grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    #[default]
    StochasticPauli,
    /// Stochastic Pauli plus thermal relaxation on two-qubit gates.
    #[serde(alias = "thermal")]
    PauliThermal,
    AmplitudeDamping,
    CoherentDrift,
    GlobalDepolarizing,
    LocalDepolarizing,
}

impl NoiseKind {
    pub fn model(self, p1: f64) -> NoiseModel {
        let spec = match self {
            NoiseKind::None => return NoiseModel::none(),
            NoiseKind::StochasticPauli => NoiseSpec::stochastic_pauli(p1),
            NoiseKind::PauliThermal => {
                return NoiseModel { components: vec![NoiseSpec::stochastic_pauli(p1), NoiseSpec::thermal_default()] }
            }
            NoiseKind::AmplitudeDamping => NoiseSpec::AmplitudeDamping { p1, ratio: 10.0 },
            NoiseKind::CoherentDrift => NoiseSpec::CoherentDrift { p1, ratio: 10.0 },
            NoiseKind::GlobalDepolarizing => NoiseSpec::GlobalDepolarizing { p1, ratio: 10.0 },
            NoiseKind::LocalDepolarizing => NoiseSpec::LocalDepolarizing { p1, ratio: 10.0 },
        };
        NoiseModel::single(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "fig-bias-vs-M", alias = "fig-bias-vs-m")]
    BiasVsM,
    #[serde(rename = "fig-stddev-vs-shots")]
    StddevVsShots,
    #[serde(rename = "appendix-esd-vs-dsp")]
    EsdVsDsp,
    #[serde(rename = "appendix-a")]
    DualDistance,
    #[serde(rename = "queries")]
    Queries,
    #[serde(rename = "cost")]
    Cost,
    /// Bias and shot-noise spread over the full `p1 x M x N_s` grid.
    #[serde(rename = "sweep")]
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::BiasVsM => "fig-bias-vs-M",
            Scenario::StddevVsShots => "fig-stddev-vs-shots",
            Scenario::EsdVsDsp => "appendix-esd-vs-dsp",
            Scenario::DualDistance => "appendix-a",
            Scenario::Queries => "queries",
            Scenario::Cost => "cost",
            Scenario::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeSettings {
    pub max_iters: usize,
    pub init_scale: f64,
}

impl Default for VqeSettings {
    fn default() -> Self {
        VqeSettings { max_iters: 500, init_scale: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub graph: GraphSpec,
    pub layers: usize,
    /// Block structure for the dc subspace.
    pub partition: PartitionSpec,
    pub block_layers: usize,
    pub noise: NoiseKind,
    pub p1: Vec<f64>,
    pub subspaces: Vec<SubspaceKind>,
    pub m: Vec<usize>,
    /// M values for the dc subspace; empty means `m`.
    pub dc_m: Vec<usize>,
    /// Fault amplification factors; empty means `lambda_k = k`.
    pub lambdas: Vec<f64>,
    pub shots: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Regularization threshold without shot noise. With shots it is `10 / sqrt(N_s)`.
    pub threshold: f64,
    pub reuse: bool,
    pub convolution: Convolution,
    pub boundary: BoundaryMode,
    /// Flat JSON array of whole-system ansatz parameters.
    pub params_file: Option<PathBuf>,
    /// JSON array with one parameter array per partition block.
    pub block_params_file: Option<PathBuf>,
    pub vqe: VqeSettings,
    /// Expected error counts in the `appendix-a` scenario.
    pub budgets: Vec<f64>,
    /// Circuit depths in the `appendix-a` scenario.
    pub depths: Vec<usize>,
    /// Random parameter draws per depth in the `appendix-a` scenario.
    pub instances: usize,
    /// ESD copies for the `appendix-esd-vs-dsp` scenario.
    pub copies: usize,
    pub dsp_mode: DspMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::BiasVsM,
            graph: GraphSpec::Named("path-8".into()),
            layers: 8,
            partition: PartitionSpec::Named("halves".into()),
            block_layers: 8,
            noise: NoiseKind::StochasticPauli,
            p1: vec![2e-6, 2e-5, 2e-4],
            subspaces: vec![SubspaceKind::Power, SubspaceKind::Fault, SubspaceKind::DivideAndConquer],
            m: vec![1, 2, 3, 4, 5],
            dc_m: Vec::new(),
            lambdas: Vec::new(),
            shots: vec![1e6, 1e7, 1e8, 1e9, 1e10, 1e11],
            samples: 1000,
            seed: 0,
            threshold: 1e-12,
            reuse: true,
            convolution: Convolution::Symmetric,
            boundary: BoundaryMode::Symmetrized,
            params_file: None,
            block_params_file: None,
            vqe: VqeSettings::default(),
            budgets: vec![0.5, 1.0, 1.5],
            depths: (1..=100).map(|k| 10 * k).collect(),
            instances: 20,
            copies: 2,
            dsp_mode: DspMode::Direct,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        let g = self.graph.resolve()?;
        if self.p1.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("p1 values must lie in [0, 1]");
        }
        if self.m.iter().chain(&self.dc_m).any(|&m| m == 0) {
            return bad("M values must be positive");
        }
        if self.shots.iter().any(|s| !(*s >= 1.0)) {
            return bad("shot counts must be at least 1");
        }
        if !self.lambdas.is_empty()
            && self.lambdas.len() < self.m_for(SubspaceKind::Fault).iter().max().copied().unwrap_or(0)
        {
            return bad("fewer amplification factors than the largest fault M");
        }
        if self.subspaces.contains(&SubspaceKind::DivideAndConquer) {
            self.partition.resolve(&g)?;
        }
        if self.samples == 0 || self.instances == 0 {
            return bad("samples and instances must be positive");
        }
        if self.copies < 2 {
            return bad("ESD needs at least two copies");
        }
        if !(self.threshold >= 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in [0, 1)");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn m_for(&self, kind: SubspaceKind) -> Vec<usize> {
        if kind == SubspaceKind::DivideAndConquer && !self.dc_m.is_empty() {
            self.dc_m.clone()
        } else {
            self.m.clone()
        }
    }

    fn lambdas_for(&self, m: usize) -> Vec<f64> {
        if self.lambdas.is_empty() {
            (1..=m).map(|k| k as f64).collect()
        } else {
            self.lambdas[..m].to_vec()
        }
    }

    fn opts(&self) -> BuildOptions {
        BuildOptions { convolution: self.convolution, boundary: self.boundary, ..BuildOptions::default() }
    }

    fn vqe_options(&self) -> VqeOptions {
        VqeOptions {
            max_iters: self.vqe.max_iters,
            seed: self.seed,
            init_scale: self.vqe.init_scale,
            ..VqeOptions::default()
        }
    }
}

/// Independent 64-bit stream id for a grid point.
pub fn substream(seed: u64, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Hamiltonian, exact ground energy and noise-free trained circuits.
#[derive(Clone, Debug)]
pub struct Setup {
    pub graph: Graph,
    pub h: PauliSum,
    pub e_true: f64,
    pub ansatz: Circuit,
    pub params: Vec<f64>,
    pub vqe_energy: f64,
    pub partition: Option<SystemPartition>,
    /// One noise-free circuit per partition block.
    pub blocks: Vec<Circuit>,
    pub block_params: Vec<Vec<f64>>,
    /// Energy of the product of the noise-free block states.
    pub separable_energy: f64,
}

impl Setup {
    pub fn window(&self) -> Window {
        Window::around(self.e_true)
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

type Edge = (usize, usize);

/// Train (or load) the whole-system and per-block parameters. Relative
/// parameter paths resolve against `base`. Blocks with the same local graph share one optimization.
pub fn prepare(cfg: &ExperimentConfig, base: &Path) -> Result<Setup> {
    let graph = cfg.graph.resolve()?;
    let h = graph.hamiltonian()?;
    let (e_true, _) = vqe::exact_ground(&h)?;
    let spec = AnsatzSpec { n: graph.n, layers: cfg.layers, edges: graph.edges.clone() };
    let params = match &cfg.params_file {
        Some(p) => vqe::load_params(&resolve_path(base, p))?,
        None => vqe::optimize(&spec, &h, &cfg.vqe_options())?.params,
    };
    let ansatz = spec.circuit(&params)?;
    let vqe_energy = vqe::energy(&ansatz, &h);

    let needs_blocks = cfg.subspaces.contains(&SubspaceKind::DivideAndConquer)
        && matches!(
            cfg.scenario,
            Scenario::BiasVsM | Scenario::StddevVsShots | Scenario::Queries | Scenario::Cost | Scenario::Sweep
        );
    let (partition, blocks, block_params, separable_energy) = if needs_blocks {
        let part = cfg.partition.resolve(&graph)?;
        let loaded: Option<Vec<Vec<f64>>> = match &cfg.block_params_file {
            Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(resolve_path(base, p))?)?),
            None => None,
        };
        if loaded.as_ref().is_some_and(|l| l.len() != part.blocks.len()) {
            return Err(Error::InvalidConfig("block parameter file needs one array per block".into()));
        }
        // (local edges, block size, parameters) of each distinct block trained so far
        let mut trained: Vec<(Vec<Edge>, usize, Vec<f64>)> = Vec::new();
        let mut blocks = Vec::new();
        let mut block_params = Vec::new();
        for (i, b) in part.blocks.iter().enumerate() {
            let edges = graph.induced(b);
            let bspec = AnsatzSpec { n: b.len(), layers: cfg.block_layers, edges: edges.clone() };
            let p = match &loaded {
                Some(l) => l[i].clone(),
                None => match trained.iter().find(|t| t.0 == edges && t.1 == b.len()) {
                    Some(t) => t.2.clone(),
                    None => {
                        let bh = build_ising(b.len(), &edges)?;
                        let p = vqe::optimize(&bspec, &bh, &cfg.vqe_options())?.params;
                        trained.push((edges.clone(), b.len(), p.clone()));
                        p
                    }
                },
            };
            blocks.push(bspec.circuit(&p)?);
            block_params.push(p);
        }
        let mut product = Circuit::new(graph.n);
        for (c, b) in blocks.iter().zip(&part.blocks) {
            product.extend(&c.remap(graph.n, b));
        }
        let sep = vqe::energy(&product, &h);
        (Some(part), blocks, block_params, sep)
    } else {
        (None, Vec::new(), Vec::new(), f64::NAN)
    };
    Ok(Setup { graph, h, e_true, ansatz, params, vqe_energy, partition, blocks, block_params, separable_energy })
}

/// One CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt)
}

fn leading(m: &DMatrix<C>, k: usize) -> DMatrix<C> {
    m.view((0, 0), (k, k)).into_owned()
}

/// Whole-system noisy circuits and matrices for the largest M of one subspace kind.
fn build_kind(
    cfg: &ExperimentConfig,
    setup: &Setup,
    kind: SubspaceKind,
    m: usize,
    model: &NoiseModel,
) -> Result<SubspaceMatrices> {
    let opts = cfg.opts();
    match kind {
        SubspaceKind::Power => build_power(m, &setup.h, &attach_noise(&setup.ansatz, model, cfg.seed)?, &opts),
        SubspaceKind::Fault => {
            build_fault(&setup.h, &amplified_circuits(&setup.ansatz, model, &cfg.lambdas_for(m), cfg.seed)?, &opts)
        }
        SubspaceKind::DivideAndConquer => {
            let part = setup.partition.as_ref().ok_or_else(|| Error::InvalidConfig("dc needs a partition".into()))?;
            let noisy: Vec<Circuit> =
                setup.blocks.iter().map(|b| attach_noise(b, model, cfg.seed)).collect::<Result<_>>()?;
            build_dc(m, &setup.h, part, &noisy, &opts)
        }
    }
}

fn plan_kind(
    cfg: &ExperimentConfig,
    setup: &Setup,
    kind: SubspaceKind,
    m: usize,
    model: &NoiseModel,
) -> Result<QueryPlan> {
    let opts = cfg.opts();
    match kind {
        SubspaceKind::Power => plan_power(m, &setup.h, &attach_noise(&setup.ansatz, model, cfg.seed)?, &opts),
        SubspaceKind::Fault => {
            plan_fault(&setup.h, &amplified_circuits(&setup.ansatz, model, &cfg.lambdas_for(m), cfg.seed)?, &opts)
        }
        SubspaceKind::DivideAndConquer => {
            let part = setup.partition.as_ref().ok_or_else(|| Error::InvalidConfig("dc needs a partition".into()))?;
            let noisy: Vec<Circuit> =
                setup.blocks.iter().map(|b| attach_noise(b, model, cfg.seed)).collect::<Result<_>>()?;
            plan_dc(m, &setup.h, part, &noisy, &opts)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasRow {
    pub kind: SubspaceKind,
    pub p1: f64,
    pub m: usize,
    pub queries: usize,
    /// `None` when no eigenvalue lies in the window.
    pub energy: Option<f64>,
    pub bias: Option<f64>,
    pub retained: usize,
    pub lambda_min_s: f64,
    pub alpha_norm4: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Baseline {
    pub p1: f64,
    pub e_true: f64,
    pub expected_errors: f64,
    pub vqe_bias: f64,
    pub unmitigated_bias: f64,
    pub dsp_bias: f64,
    pub separable_bias: f64,
}

fn solve_row(kind: SubspaceKind, p1: f64, m: usize, queries: usize, sol: Result<GevpSolution>, e_true: f64) -> BiasRow {
    match sol {
        Ok(s) => BiasRow {
            kind,
            p1,
            m,
            queries,
            energy: Some(s.energy),
            bias: Some(s.energy - e_true),
            retained: s.retained_dim,
            lambda_min_s: s.lambda_min_s,
            alpha_norm4: cost::dc_overhead(&s.alpha_prime),
        },
        Err(_) => BiasRow {
            kind,
            p1,
            m,
            queries,
            energy: None,
            bias: None,
            retained: 0,
            lambda_min_s: f64::NAN,
            alpha_norm4: f64::NAN,
        },
    }
}

fn baseline(cfg: &ExperimentConfig, setup: &Setup, p1: f64) -> Result<Baseline> {
    let noisy = attach_noise(&setup.ansatz, &cfg.noise.model(p1), cfg.seed)?;
    let rho = noisy.run()?.data;
    let bar = noisy.dual().run()?.data;
    let hm = setup.h.to_matrix();
    let sym = symmetrized_product(&rho, &bar);
    let dsp = trace_product(&sym, &hm).re / sym.trace().re;
    Ok(Baseline {
        p1,
        e_true: setup.e_true,
        expected_errors: noisy.expected_errors(),
        vqe_bias: setup.vqe_energy - setup.e_true,
        unmitigated_bias: trace_product(&rho, &hm).re - setup.e_true,
        dsp_bias: dsp - setup.e_true,
        separable_bias: setup.separable_energy - setup.e_true,
    })
}

/// Bias against M without shot noise. Each subspace is built once at its
/// largest M; smaller M use the leading principal blocks.
pub fn bias_vs_m(cfg: &ExperimentConfig, setup: &Setup) -> Result<(Vec<BiasRow>, Vec<Baseline>)> {
    let per_p1: Vec<(Vec<BiasRow>, Baseline)> = cfg
        .p1
        .par_iter()
        .map(|&p1| {
            let model = cfg.noise.model(p1);
            let mut rows = Vec::new();
            for &kind in &cfg.subspaces {
                let ms = cfg.m_for(kind);
                let Some(&mmax) = ms.iter().max() else { continue };
                let mats = build_kind(cfg, setup, kind, mmax, &model)?;
                for &m in &ms {
                    let q = if m == mmax {
                        mats.plan.count(cfg.reuse)
                    } else {
                        plan_kind(cfg, setup, kind, m, &model)?.count(cfg.reuse)
                    };
                    let sol =
                        gevp::solve_pencil(&leading(&mats.s, m), &leading(&mats.h, m), cfg.threshold, setup.window());
                    rows.push(solve_row(kind, p1, m, q, sol, setup.e_true));
                }
            }
            Ok((rows, baseline(cfg, setup, p1)?))
        })
        .collect::<Result<_>>()?;
    Ok(per_p1.into_iter().fold((Vec::new(), Vec::new()), |(mut r, mut b), (rows, base)| {
        r.extend(rows);
        b.push(base);
        (r, b)
    }))
}

fn bias_tables(rows: &[BiasRow], bases: &[Baseline]) -> Vec<Table> {
    let mut t = Table::new(
        "bias",
        &["subspace", "p1", "M", "queries", "energy", "bias", "retained", "lambda_min_s", "alpha_norm4"],
    );
    for r in rows {
        t.rows.push(vec![
            r.kind.name().into(),
            fmt(r.p1),
            r.m.to_string(),
            r.queries.to_string(),
            fmt_opt(r.energy),
            fmt_opt(r.bias),
            r.retained.to_string(),
            fmt(r.lambda_min_s),
            fmt(r.alpha_norm4),
        ]);
    }
    let mut b = Table::new(
        "baselines",
        &["p1", "e_true", "expected_errors", "vqe_bias", "unmitigated_bias", "dsp_bias", "separable_bias"],
    );
    for x in bases {
        b.rows.push(vec![
            fmt(x.p1),
            fmt(x.e_true),
            fmt(x.expected_errors),
            fmt(x.vqe_bias),
            fmt(x.unmitigated_bias),
            fmt(x.dsp_bias),
            fmt(x.separable_bias),
        ]);
    }
    vec![t, b]
}

#[derive(Clone, Debug, PartialEq)]
pub struct StddevRow {
    pub kind: SubspaceKind,
    pub p1: f64,
    pub m: usize,
    pub shots: f64,
    pub queries: usize,
    pub mean_bias: f64,
    pub stddev: f64,
    pub rejected: usize,
    /// `4 gamma Q ||S^-1|| / sqrt(N_s)`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeRow {
    pub kind: SubspaceKind,
    pub p1: f64,
    pub m: usize,
    pub slope: f64,
}

/// Shot-noise distributions over the `p1 x subspace x M x N_s` grid. Budgets below the query count are skipped.
pub fn stddev_vs_shots(cfg: &ExperimentConfig, setup: &Setup) -> Result<(Vec<StddevRow>, Vec<SlopeRow>)> {
    let gamma = cost::gamma(&setup.h);
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (pi, &p1) in cfg.p1.iter().enumerate() {
        let model = cfg.noise.model(p1);
        for (ki, &kind) in cfg.subspaces.iter().enumerate() {
            for &m in &cfg.m_for(kind) {
                let mats = build_kind(cfg, setup, kind, m, &model)?;
                let q = mats.plan.count(cfg.reuse);
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for (si, &shots) in cfg.shots.iter().enumerate() {
                    if shots < q as f64 {
                        continue;
                    }
                    let seed = substream(cfg.seed, &[pi as u64, ki as u64, m as u64, si as u64]);
                    let sc = ShotConfig { shots, samples: cfg.samples, seed, reuse: cfg.reuse };
                    let (mean_bias, stddev, rejected) =
                        match shotnoise::sample_distribution(&mats, &sc, None, setup.window()) {
                            Ok(d) => (d.mean - setup.e_true, d.stddev, d.rejected),
                            Err(Error::Numerical(_)) => (f64::NAN, f64::NAN, cfg.samples),
                            Err(e) => return Err(e),
                        };
                    if stddev > 0.0 {
                        xs.push(shots);
                        ys.push(stddev);
                    }
                    let bound = shotnoise::stddev_bound(gamma, q, &mats.s, shots);
                    rows.push(StddevRow { kind, p1, m, shots, queries: q, mean_bias, stddev, rejected, bound });
                }
                let slope = if xs.len() >= 2 { shotnoise::loglog_slope(&xs, &ys) } else { f64::NAN };
                slopes.push(SlopeRow { kind, p1, m, slope });
            }
        }
    }
    Ok((rows, slopes))
}

fn stddev_tables(rows: &[StddevRow], slopes: &[SlopeRow]) -> Vec<Table> {
    let mut t =
        Table::new("stddev", &["subspace", "p1", "M", "shots", "queries", "mean_bias", "stddev", "rejected", "bound"]);
    for r in rows {
        t.rows.push(vec![
            r.kind.name().into(),
            fmt(r.p1),
            r.m.to_string(),
            fmt(r.shots),
            r.queries.to_string(),
            fmt(r.mean_bias),
            fmt(r.stddev),
            r.rejected.to_string(),
            fmt(r.bound),
        ]);
    }
    let mut s = Table::new("slopes", &["subspace", "p1", "M", "slope"]);
    for r in slopes {
        s.rows.push(vec![r.kind.name().into(), fmt(r.p1), r.m.to_string(), fmt(r.slope)]);
    }
    vec![t, s]
}

#[derive(Clone, Debug, PartialEq)]
pub struct EsdDspRow {
    pub p1: f64,
    pub unmitigated_bias: f64,
    pub esd_bias: f64,
    pub dsp_bias: f64,
    /// ESD estimate of `Tr[rho^2]`.
    pub purity_esd: f64,
    /// DSP estimate of `Tr[bar rho rho]`, standing in for `Tr[rho^2]`.
    pub purity_dsp: f64,
    pub purity_exact: f64,
}

/// ESD and DSP with gadgets subject to the same noise as the state preparation.
pub fn esd_vs_dsp(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<EsdDspRow>> {
    cfg.p1
        .par_iter()
        .enumerate()
        .map(|(i, &p1)| {
            let model = cfg.noise.model(p1);
            let noisy = attach_noise(&setup.ansatz, &model, cfg.seed)?;
            let gadget = GadgetNoise { model, seed: substream(cfg.seed, &[i as u64]) };
            let dsp = dsp_expectation(&noisy, &setup.h, cfg.dsp_mode, &gadget)?;
            let esd = esd_expectation(&noisy, &setup.h, cfg.copies, &gadget)?;
            let rho = noisy.run()?;
            let unmitigated = trace_product(&rho.data, &setup.h.to_matrix()).re;
            Ok(EsdDspRow {
                p1,
                unmitigated_bias: unmitigated - setup.e_true,
                esd_bias: esd.value - setup.e_true,
                dsp_bias: dsp.value - setup.e_true,
                purity_esd: esd.purity,
                purity_dsp: dsp.p0,
                purity_exact: rho.purity(),
            })
        })
        .collect()
}

fn esd_table(rows: &[EsdDspRow]) -> Table {
    let mut t = Table::new(
        "esd_vs_dsp",
        &["p1", "unmitigated_bias", "esd_bias", "dsp_bias", "purity_esd", "purity_dsp", "purity_exact"],
    );
    for r in rows {
        t.rows.push(
            [r.p1, r.unmitigated_bias, r.esd_bias, r.dsp_bias, r.purity_esd, r.purity_dsp, r.purity_exact]
                .map(fmt)
                .to_vec(),
        );
    }
    t
}

/// Per-gate rate that gives `budget` expected errors on `c` under `kind`.
pub fn p1_for_budget(c: &Circuit, kind: NoiseKind, budget: f64) -> Result<f64> {
    let reference = 1e-6;
    let per_unit = attach_noise(c, &kind.model(reference), 0)?.expected_errors() / reference;
    if !(per_unit > 0.0) {
        return Err(Error::InvalidConfig("circuit carries no noise to scale".into()));
    }
    Ok(budget / per_unit)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceRow {
    pub budget: f64,
    pub layers: usize,
    pub p1: f64,
    /// Mean over instances of `D(rho, bar rho)`.
    pub d_dual: f64,
    /// Mean of `D(rho^2, (bar rho rho + rho bar rho) / 2)`.
    pub d_square: f64,
}

/// Trace distances between noisy states and their duals at fixed expected error counts.
/// Instance `k` at depth `L` uses the same random parameters for every budget.
pub fn dual_distance(cfg: &ExperimentConfig) -> Result<Vec<DistanceRow>> {
    let g = cfg.graph.resolve()?;
    let grid: Vec<(usize, usize)> = cfg.depths.iter().flat_map(|&l| (0..cfg.instances).map(move |k| (l, k))).collect();
    let per: Vec<Vec<(f64, f64, f64)>> = grid
        .par_iter()
        .map(|&(l, k)| {
            let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, &[l as u64, k as u64]));
            let params: Vec<f64> =
                (0..2 * g.n * (l + 1)).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
            let c = build_ansatz(g.n, l, &params, &g.edges)?;
            cfg.budgets
                .iter()
                .map(|&b| {
                    let p1 = p1_for_budget(&c, cfg.noise, b)?;
                    let noisy = attach_noise(&c, &cfg.noise.model(p1), cfg.seed)?;
                    let rho = noisy.run()?.data;
                    let bar = noisy.dual().run()?.data;
                    let d1 = trace_distance(&rho, &bar)?;
                    let d2 = trace_distance(&(&rho * &rho), &symmetrized_product(&rho, &bar))?;
                    Ok((p1, d1, d2))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (bi, &budget) in cfg.budgets.iter().enumerate() {
        for (li, &layers) in cfg.depths.iter().enumerate() {
            let pts = &per[li * cfg.instances..(li + 1) * cfg.instances];
            let n = cfg.instances as f64;
            rows.push(DistanceRow {
                budget,
                layers,
                p1: pts.iter().map(|p| p[bi].0).sum::<f64>() / n,
                d_dual: pts.iter().map(|p| p[bi].1).sum::<f64>() / n,
                d_square: pts.iter().map(|p| p[bi].2).sum::<f64>() / n,
            });
        }
    }
    Ok(rows)
}

fn distance_table(rows: &[DistanceRow]) -> Table {
    let mut t = Table::new("trace_distance", &["budget", "layers", "mean_p1", "d_rho_bar", "d_square_sym", "ratio"]);
    for r in rows {
        t.rows.push(vec![
            fmt(r.budget),
            r.layers.to_string(),
            fmt(r.p1),
            fmt(r.d_dual),
            fmt(r.d_square),
            fmt(r.d_dual / r.d_square),
        ]);
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRow {
    pub kind: SubspaceKind,
    pub m: usize,
    pub with_reuse: usize,
    pub without_reuse: usize,
    pub hamiltonian_terms: usize,
}

/// Query counts, plus the full plan table of each point.
pub fn queries(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<(QueryRow, QueryPlan)>> {
    // noise keeps amplified fault states distinct
    let p1 = cfg.p1.first().copied().filter(|&p| p > 0.0).unwrap_or(1e-4);
    let model = cfg.noise.model(p1);
    let grid: Vec<(SubspaceKind, usize)> =
        cfg.subspaces.iter().flat_map(|&k| cfg.m_for(k).into_iter().map(move |m| (k, m))).collect();
    grid.par_iter()
        .map(|&(kind, m)| {
            let plan = plan_kind(cfg, setup, kind, m, &model)?;
            let row = QueryRow {
                kind,
                m,
                with_reuse: plan.count(true),
                without_reuse: plan.count(false),
                hamiltonian_terms: setup.h.len(),
            };
            Ok((row, plan))
        })
        .collect()
}

fn query_tables(rows: &[(QueryRow, QueryPlan)]) -> Vec<Table> {
    let mut t = Table::new("queries", &["subspace", "M", "queries_reuse", "queries_no_reuse", "hamiltonian_terms"]);
    let mut out = Vec::new();
    for (r, plan) in rows {
        t.rows.push(vec![
            r.kind.name().into(),
            r.m.to_string(),
            r.with_reuse.to_string(),
            r.without_reuse.to_string(),
            r.hamiltonian_terms.to_string(),
        ]);
        let csv = plan.to_csv();
        let mut lines = csv.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
        out.push(Table {
            name: format!("plan_{}_M{}", r.kind.name(), r.m),
            header: lines.next().unwrap_or_default(),
            rows: lines.collect(),
        });
    }
    out.insert(0, t);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostRow {
    pub kind: SubspaceKind,
    pub m: usize,
    pub bias: Option<f64>,
    pub queries: usize,
    pub alpha_norm4: f64,
    /// `M^2 Q ||alpha'||^4`.
    pub metric: f64,
    /// `||alpha'||^4 Q / Q_power(M)`; dc only.
    pub r_ratio: f64,
}

/// Noise-free sweep of bias against sampling-cost metric for the power and dc subspaces.
pub fn cost_sweep(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<CostRow>> {
    let none = NoiseModel::none();
    let mut rows = Vec::new();
    for &kind in &cfg.subspaces {
        let ms = cfg.m_for(kind);
        let Some(&mmax) = ms.iter().max() else { continue };
        let mats = build_kind(cfg, setup, kind, mmax, &none)?;
        let extra: Vec<Result<(usize, usize)>> = ms
            .par_iter()
            .map(|&m| {
                let q = if m == mmax {
                    mats.plan.count(cfg.reuse)
                } else {
                    plan_kind(cfg, setup, kind, m, &none)?.count(cfg.reuse)
                };
                let q_whole = if kind == SubspaceKind::DivideAndConquer {
                    plan_kind(cfg, setup, SubspaceKind::Power, m, &none)?.count(cfg.reuse)
                } else {
                    q
                };
                Ok((q, q_whole))
            })
            .collect();
        for (&m, qs) in ms.iter().zip(extra) {
            let (q, q_whole) = qs?;
            let sol = gevp::solve_pencil(&leading(&mats.s, m), &leading(&mats.h, m), cfg.threshold, setup.window());
            let row = match sol {
                Ok(s) => CostRow {
                    kind,
                    m,
                    bias: Some(s.energy - setup.e_true),
                    queries: q,
                    alpha_norm4: cost::dc_overhead(&s.alpha_prime),
                    metric: cost::cost_metric(m, q, &s.alpha_prime),
                    r_ratio: if kind == SubspaceKind::DivideAndConquer {
                        cost::r_ratio(&s.alpha_prime, q, q_whole)
                    } else {
                        f64::NAN
                    },
                },
                Err(_) => CostRow {
                    kind,
                    m,
                    bias: None,
                    queries: q,
                    alpha_norm4: f64::NAN,
                    metric: f64::NAN,
                    r_ratio: f64::NAN,
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn cost_table(rows: &[CostRow]) -> Table {
    let mut t = Table::new("cost", &["subspace", "M", "bias", "queries", "alpha_norm4", "metric", "r_ratio"]);
    for r in rows {
        t.rows.push(vec![
            r.kind.name().into(),
            r.m.to_string(),
            fmt_opt(r.bias),
            r.queries.to_string(),
            fmt(r.alpha_norm4),
            fmt(r.metric),
            fmt(r.r_ratio),
        ]);
    }
    t
}

/// Named scalar diagnostics of one noisy state, for debugging.
pub fn oracle_report(cfg: &ExperimentConfig, setup: &Setup, p1: f64) -> Result<Vec<(String, f64)>> {
    let noisy = attach_noise(&setup.ansatz, &cfg.noise.model(p1), cfg.seed)?;
    let rho = noisy.run()?.data;
    let bar = noisy.dual().run()?.data;
    let hm = setup.h.to_matrix();
    let sym = symmetrized_product(&rho, &bar);
    let p0 = trace_product(&bar, &rho).re;
    Ok(vec![
        ("e_true".into(), setup.e_true),
        ("vqe_energy".into(), setup.vqe_energy),
        ("expected_errors".into(), noisy.expected_errors()),
        ("tr_rho_h".into(), trace_product(&rho, &hm).re),
        ("tr_rho_sq".into(), trace_product(&rho, &rho).re),
        ("tr_bar_rho".into(), p0),
        ("dsp_energy".into(), trace_product(&sym, &hm).re / p0),
        ("trace_distance_rho_bar".into(), trace_distance(&rho, &bar)?),
        ("gamma".into(), cost::gamma(&setup.h)),
    ])
}

/// Tables produced by one scenario.
#[derive(Clone, Debug)]
pub struct Report {
    pub scenario: Scenario,
    pub tables: Vec<Table>,
}

/// Run `cfg.scenario`. Relative parameter paths resolve against `base`.
pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<Report> {
    cfg.validate()?;
    let tables = if cfg.scenario == Scenario::DualDistance {
        vec![distance_table(&dual_distance(cfg)?)]
    } else {
        let setup = prepare(cfg, base)?;
        match cfg.scenario {
            Scenario::BiasVsM => {
                let (r, b) = bias_vs_m(cfg, &setup)?;
                bias_tables(&r, &b)
            }
            Scenario::StddevVsShots => {
                let (r, s) = stddev_vs_shots(cfg, &setup)?;
                stddev_tables(&r, &s)
            }
            Scenario::Sweep => {
                let (r, b) = bias_vs_m(cfg, &setup)?;
                let (sr, ss) = stddev_vs_shots(cfg, &setup)?;
                let mut t = bias_tables(&r, &b);
                t.extend(stddev_tables(&sr, &ss));
                t
            }
            Scenario::EsdVsDsp => vec![esd_table(&esd_vs_dsp(cfg, &setup)?)],
            Scenario::Queries => query_tables(&queries(cfg, &setup)?),
            Scenario::Cost => vec![cost_table(&cost_sweep(cfg, &setup)?)],
            Scenario::DualDistance => unreachable!(),
        }
    };
    Ok(Report { scenario: cfg.scenario, tables })
}
