use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualgse"))
}

fn quick_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = run(&[
            "--threads",
            threads,
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    assert_eq!(fa, fb);
    let names: Vec<_> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["baselines.csv", "bias.csv", "config.json", "manifest.json", "slopes.csv", "stddev.csv"]);
}

#[test]
fn manifest_lists_every_table_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out =
        run(&["run", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenario"], "fig-bias-vs-M");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let body = std::fs::read(tmp.path().join(f["file"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"], hex.as_str());
        assert_eq!(f["rows"].as_u64().unwrap() as usize, body.iter().filter(|&&c| c == b'\n').count() - 1);
    }
    // the recorded config reproduces the hash
    let written = std::fs::read_to_string(tmp.path().join("config.json")).unwrap();
    let again: dualgse_core::experiment::ExperimentConfig = serde_json::from_str(&written).unwrap();
    assert_eq!(again.hash(), m["config_hash"].as_str().unwrap());
    assert_eq!(again.seed, 11);
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(run(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(1));

    let bad_field = tmp.path().join("bad.json");
    std::fs::write(&bad_field, r#"{"scenario": "queries", "colour": "red"}"#).unwrap();
    assert_eq!(run(&["run", "--config", bad_field.to_str().unwrap()]).status.code(), Some(1));

    let bad_m = tmp.path().join("m0.json");
    std::fs::write(&bad_m, r#"{"m": [0, 1]}"#).unwrap();
    assert_eq!(run(&["run", "--config", bad_m.to_str().unwrap()]).status.code(), Some(1));

    let no_params = tmp.path().join("params.json");
    std::fs::write(&no_params, r#"{"graph": "path-4", "params_file": "absent.json"}"#).unwrap();
    let out = run(&["run", "--config", no_params.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));

    let cfg = quick_config();
    for args in [["--scenario", "nope"], ["--subspace", "krylov"], ["--noise", "loud"]] {
        let mut all = vec!["run", "--config", cfg.to_str().unwrap()];
        all.extend(args);
        assert_eq!(run(&all).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a file where the output directory should go
    let blocker = tmp.path().join("out");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = quick_config();
    let out = run(&["queries", "--config", cfg.to_str().unwrap(), "--out-dir", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // 11 qubits exceed the dense simulator
    let big = tmp.path().join("big.json");
    std::fs::write(
        &big,
        r#"{"graph": "path-11", "subspaces": ["power"], "m": [2], "vqe": {"max_iters": 1, "init_scale": 0.1}}"#,
    )
    .unwrap();
    assert_eq!(
        run(&["run", "--config", big.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn trained_parameters_feed_back_into_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let train = tmp.path().join("train");
    let out = run(&["vqe", "--config", cfg.to_str().unwrap(), "--out-dir", train.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(train.join("params.json").is_file() && train.join("block_params.json").is_file());

    let mut c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    c["params_file"] = "train/params.json".into();
    c["block_params_file"] = "train/block_params.json".into();
    let loaded = tmp.path().join("loaded.json");
    std::fs::write(&loaded, c.to_string()).unwrap();

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", a.to_str().unwrap()]).status.success());
    assert!(run(&["run", "--config", loaded.to_str().unwrap(), "--out-dir", b.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(a.join("bias.csv")).unwrap(), std::fs::read(b.join("bias.csv")).unwrap());
}

#[test]
fn overrides_select_subspace_and_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--subspace",
        "power",
        "--p1",
        "2e-6,2e-4",
        "--noise",
        "thermal",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bias = std::fs::read_to_string(tmp.path().join("bias.csv")).unwrap();
    let rows: Vec<_> = bias.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.starts_with("power,")));
    let written = std::fs::read_to_string(tmp.path().join("config.json")).unwrap();
    assert!(written.contains("pauli-thermal"));
}

#[test]
fn oracle_prints_named_values() {
    let cfg = quick_config();
    let out = run(&["oracle", "--config", cfg.to_str().unwrap(), "--p1", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let get =
        |k: &str| -> f64 { text.lines().find_map(|l| l.strip_prefix(&format!("{k},"))).unwrap().parse().unwrap() };
    // noise-free: the dual state equals the state
    assert!(get("trace_distance_rho_bar") < 1e-12);
    assert!((get("tr_rho_sq") - 1.0).abs() < 1e-12);
    assert!((get("dsp_energy") - get("vqe_energy")).abs() < 1e-10);
    assert_eq!(get("gamma"), 7.0);
}
