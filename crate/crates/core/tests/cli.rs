use std::path::Path;
use std::process::Command;

use rlprune::harness::{load_model, ExperimentConfig, METRICS_HEADER};

const TINY: &[&str] = &[
    "--episodes",
    "6",
    "--set",
    "actor.hidden=8,8",
    "--set",
    "critic.hidden=8",
    "--set",
    "ppo.rollout_steps=64",
    "--set",
    "prune.t_start=1",
    "--set",
    "prune.total_prune_steps=2",
    "--set",
    "prune.prune_frequency=2",
];

fn rlprune(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rlprune"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn rlprune")
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["cartpole.conf", "pendulum.conf"] {
        let cfg = ExperimentConfig::from_file(&root.join(name)).unwrap();
        cfg.validate_grid().unwrap();
    }
}

#[test]
fn train_writes_outputs_and_tools_read_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec![
        "train",
        "--strategy",
        "dsp",
        "--ratio",
        "0.5",
        "--seed",
        "3",
        "--out-dir",
        out,
    ];
    args.extend_from_slice(TINY);
    let res = rlprune(&args);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let csv = std::fs::read_to_string(dir.path().join("dsp_lam1e-4_r0.5_seed3.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(METRICS_HEADER));
    assert_eq!(csv.lines().count(), 7);
    let model_path = dir.path().join("dsp_lam1e-4_r0.5_seed3_compact.model");
    let model = load_model(&model_path).unwrap();
    assert_eq!(model.actor.alive_hidden(), 8);

    let counts = rlprune(&["counts", "--model", model_path.to_str().unwrap()]);
    assert!(counts.status.success());
    assert!(String::from_utf8_lossy(&counts.stdout).contains("neurons 8"));

    let heat = dir.path().join("h.csv");
    let res = rlprune(&[
        "heatmap",
        "--model",
        model_path.to_str().unwrap(),
        "--layer",
        "0",
        "--out",
        heat.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let rows = model.actor.layers()[0].weights().rows();
    assert_eq!(
        std::fs::read_to_string(&heat).unwrap().lines().count(),
        rows
    );
}

#[test]
fn grid_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec![
        "grid",
        "--seed",
        "1,2",
        "--out-dir",
        out,
        "--set",
        "grid.strategies=dsp,none",
        "--set",
        "grid.lambda=1e-4",
        "--set",
        "grid.ratio=0.5",
    ];
    args.extend_from_slice(TINY);
    let res = rlprune(&args);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("none_lam0e0_r0_seed2.csv").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    assert!(!rlprune(&["train", "--strategy", "bogus"]).status.success());
    assert!(!rlprune(&["train", "--set", "episodes=0"]).status.success());
    assert!(!rlprune(&["counts", "--model", "/nonexistent/model"])
        .status
        .success());
}
