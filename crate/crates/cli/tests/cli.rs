use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn lpvdn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpvdn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let cfg = json!({
        "dataset": {"kind": "synthetic", "k": 2, "dim": 6, "n_per_cluster": 30, "separation": 8.0, "seed": 3},
        "k": 2,
        "latent_dim": 3,
        "out_dim": 2,
        "alpha0": 1.0,
        "alpha1": 1e-2,
        "perplexity": 5.0,
        "batch_size": 20,
        "epochs": 2,
        "lr": 2e-3,
        "seed": 4,
        "pretrain_epochs": 2,
        "hidden": {"encoder": [8], "discriminator": [8], "mapper": [8]}
    });
    let path = dir.join("c.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_run_directory_and_downstream_commands_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("runs/a");
    let out = lpvdn(&["train", "--config", s(&cfg), "--out", s(&run)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "checkpoint.json",
        "checkpoint.bin",
        "report.json",
        "train.log",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let log = std::fs::read_to_string(run.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let acc = report["acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let eval = lpvdn(&["evaluate", "--checkpoint", s(&run)]);
    assert!(eval.status.success());
    let again: Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(again, report);

    let csv = dir.path().join("emb.csv");
    let emb = lpvdn(&["embed", "--checkpoint", s(&run), "--out", s(&csv)]);
    assert!(emb.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert_eq!(text.lines().next().unwrap(), "index,label,e0,e1");

    let near = lpvdn(&[
        "nearest",
        "--checkpoint",
        s(&run),
        "--query-index",
        "7",
        "--k",
        "10",
    ]);
    assert!(near.status.success());
    let lines: Vec<_> = String::from_utf8(near.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 10);
    assert!(lines.iter().all(|l| !l.starts_with("7\t")));
}

#[test]
fn noise_sweep_writes_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let csv = dir.path().join("sweep.csv");
    let out = lpvdn(&[
        "noise-sweep",
        "--config",
        s(&cfg),
        "--sigmas",
        "0,0.2",
        "--variants",
        "full,lg",
        "--out",
        s(&csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sigma,variant,seed,acc,nmi,ari");
    assert_eq!(lines.count(), 4);
}

#[test]
fn make_synthetic_writes_a_loadable_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("blobs.json");
    let out = lpvdn(&[
        "make-synthetic",
        "--k",
        "3",
        "--dim",
        "4",
        "--n-per-cluster",
        "5",
        "--out",
        s(&manifest),
    ]);
    assert!(out.status.success());
    let data: lpvdn::Dataset = lpvdn::dataio::load_matrix(&manifest).unwrap();
    assert_eq!((data.n(), data.dim()), (15, 4));
}

#[test]
fn malformed_config_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"k\": 4,\n  oops\n}").unwrap();
    let out = lpvdn(&[
        "train",
        "--config",
        s(&path),
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_flag_and_unknown_key_exit_one() {
    let out = lpvdn(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["surprise"] = json!(true);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = lpvdn(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_two_and_keeps_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["lr"] = json!(1e300);
    v["pretrain_epochs"] = json!(0);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let run = dir.path().join("r");
    let out = lpvdn(&["train", "--config", s(&cfg), "--out", s(&run)]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(run.join("checkpoint.json").exists());
    assert!(!run.join("report.json").exists());
}

#[test]
fn ablation_flag_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("r");
    let out = lpvdn(&[
        "train",
        "--config",
        s(&cfg),
        "--ablation",
        "lp,mi",
        "--seed",
        "9",
        "--out",
        s(&run),
    ]);
    assert!(out.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["ablation"], json!(["mi", "lp"]));
    assert_eq!(report["seed"], json!(9));
}
