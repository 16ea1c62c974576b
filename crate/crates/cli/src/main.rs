//! `dualgse`: run the subspace-expansion experiments from JSON configs and write CSV tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualgse_core::experiment::{self, ExperimentConfig, NoiseKind, Report, Scenario, Table};
use dualgse_core::subspace::SubspaceKind;
use dualgse_core::{vqe, Error};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "dualgse", version, about = "Dual-state subspace expansion experiments")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the ansatz (and per-block ansatzes) and save the parameters.
    Vqe(Common),
    /// Run the scenario named in the config or by --scenario.
    Run(Common),
    /// Bias and shot-noise spread over the p1 x M x N_s grid.
    Sweep(Common),
    /// Query-plan tables for every subspace and M.
    Queries(Common),
    /// Print trace diagnostics of the noisy state at the first p1.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated noise rates, replacing the config grid.
    #[arg(long, value_delimiter = ',')]
    p1: Vec<f64>,
    /// Comma-separated subspace kinds (power, fault, dc).
    #[arg(long, value_delimiter = ',')]
    subspace: Vec<String>,
    #[arg(long)]
    noise: Option<String>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Parse(_) | Error::InvalidPartition(_) | Error::Json(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn parse_name<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, Failure> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| Failure::Config(format!("unknown {what} '{s}'")))
}

/// Effective config and the directory relative parameter paths resolve against.
fn load(c: &Common, forced: Option<Scenario>) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let (mut cfg, base) = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = &c.scenario {
        cfg.scenario = Scenario::parse(s)?;
    }
    if let Some(s) = forced {
        cfg.scenario = s;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if !c.p1.is_empty() {
        cfg.p1 = c.p1.clone();
    }
    if !c.subspace.is_empty() {
        cfg.subspaces =
            c.subspace.iter().map(|s| parse_name::<SubspaceKind>("subspace", s)).collect::<Result<_, _>>()?;
    }
    if let Some(n) = &c.noise {
        cfg.noise = parse_name::<NoiseKind>("noise kind", n)?;
    }
    cfg.validate()?;
    for p in cfg.params_file.iter().chain(&cfg.block_params_file) {
        let full = base.join(p);
        if !full.is_file() {
            return Err(Failure::Config(format!("parameter file {} not found", full.display())));
        }
    }
    Ok((cfg, base))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the tables, the effective config and a manifest naming every file.
fn write_outputs(dir: &Path, cfg: &ExperimentConfig, tables: &[Table]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::new();
    for t in tables {
        let name = format!("{}.csv", t.name);
        let csv = t.to_csv();
        std::fs::write(dir.join(&name), &csv).map_err(io)?;
        files.push(serde_json::json!({ "file": name, "rows": t.rows.len(), "sha256": sha256_hex(csv.as_bytes()) }));
    }
    let config_json = serde_json::to_string_pretty(cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(dir.join("config.json"), format!("{config_json}\n")).map_err(io)?;
    let manifest = serde_json::json!({
        "scenario": cfg.scenario.name(),
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), format!("{text}\n")).map_err(io)?;
    Ok(())
}

fn run_scenario(c: &Common, forced: Option<Scenario>) -> Result<(), Failure> {
    let (cfg, base) = load(c, forced)?;
    eprintln!("running {} (seed {}, config {})", cfg.scenario.name(), cfg.seed, &cfg.hash()[..12]);
    let Report { tables, .. } = experiment::run(&cfg, &base)?;
    write_outputs(&c.out_dir, &cfg, &tables)?;
    eprintln!("wrote {} tables to {}", tables.len(), c.out_dir.display());
    Ok(())
}

fn train(c: &Common) -> Result<(), Failure> {
    let (cfg, base) = load(c, None)?;
    let setup = experiment::prepare(&cfg, &base)?;
    let io = |e: Error| Failure::Runtime(e.to_string());
    std::fs::create_dir_all(&c.out_dir).map_err(|e| Failure::Runtime(e.to_string()))?;
    vqe::save_params(&c.out_dir.join("params.json"), &setup.params).map_err(io)?;
    let mut t = Table {
        name: "vqe".into(),
        header: ["target", "qubits", "energy", "e_true", "bias"].map(String::from).to_vec(),
        rows: vec![vec![
            "whole".into(),
            setup.graph.n.to_string(),
            format!("{:.12e}", setup.vqe_energy),
            format!("{:.12e}", setup.e_true),
            format!("{:.12e}", setup.vqe_energy - setup.e_true),
        ]],
    };
    if !setup.blocks.is_empty() {
        let text = serde_json::to_string_pretty(&setup.block_params).map_err(|e| Failure::Runtime(e.to_string()))?;
        std::fs::write(c.out_dir.join("block_params.json"), text).map_err(|e| Failure::Runtime(e.to_string()))?;
        t.rows.push(vec![
            "separable".into(),
            setup.graph.n.to_string(),
            format!("{:.12e}", setup.separable_energy),
            format!("{:.12e}", setup.e_true),
            format!("{:.12e}", setup.separable_energy - setup.e_true),
        ]);
    }
    write_outputs(&c.out_dir, &cfg, &[t])?;
    eprintln!("VQE energy {:.10} (exact {:.10})", setup.vqe_energy, setup.e_true);
    Ok(())
}

fn oracle(c: &Common) -> Result<(), Failure> {
    let (cfg, base) = load(c, None)?;
    let p1 = cfg.p1.first().copied().unwrap_or(0.0);
    let setup = experiment::prepare(&cfg, &base)?;
    println!("quantity,value");
    println!("p1,{p1:.12e}");
    for (k, v) in experiment::oracle_report(&cfg, &setup, p1)? {
        println!("{k},{v:.12e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let out = match &cli.cmd {
        Cmd::Vqe(c) => train(c),
        Cmd::Run(c) => run_scenario(c, None),
        Cmd::Sweep(c) => run_scenario(c, Some(Scenario::Sweep)),
        Cmd::Queries(c) => run_scenario(c, Some(Scenario::Queries)),
        Cmd::Oracle(c) => oracle(c),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
