use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polo::checkpoint::{load_ensemble, load_net, save_ensemble, save_net};
use polo::{CliError, ExperimentConfig};
use polo_core::approximator::DenseNet;
use polo_core::ensemble::{EnsembleConfig, ValueEnsemble};
use polo_core::Bounds;
use tempfile::TempDir;

fn polo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polo")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_EXPLORE: &str = r#"{
  "command": "explore",
  "env": {"name": "box"},
  "agents": ["polo", "greedy", "mpc-no-value"],
  "seeds": [0],
  "polo": {"steps": 10, "planner": {"horizon": 8, "rollouts": 8}, "update_every": 5, "gradient_steps": 2, "batch_size": 4}
}"#;

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"command\": \"explore\",\n  \"seeds\": [0,,]\n}\n");
    let out = polo(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn invalid_field_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"command": "explore", "env": {"name": "box"}, "seeds": []}"#);
    let out = polo(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds"));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let err = ExperimentConfig::from_json("{\"command\": 3}", Path::new("x.json")).unwrap_err();
    match err {
        CliError::Parse { line, column, .. } => assert_eq!((line, column), (1, 13)),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn explore_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "e.json", SMALL_EXPLORE);
    let out_dir = dir.path().join("out");
    let out = polo(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for agent in ["polo", "greedy", "mpc-no-value"] {
        let text = fs::read_to_string(out_dir.join("coverage").join(format!("{agent}_seed0.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,coverage"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 10, "{agent}");
        assert!(rows.last().unwrap().starts_with("10,"));
    }
    let summary = fs::read_to_string(out_dir.join("explore_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn config_is_echoed_and_reloads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "e.json", SMALL_EXPLORE);
    let out_dir = dir.path().join("out");
    assert!(polo(&["run", &cfg, "--out", out_dir.to_str().unwrap()]).status.success());
    let echoed = ExperimentConfig::load(&out_dir.join("config.json")).unwrap();
    let mut original = ExperimentConfig::load(Path::new(&cfg)).unwrap();
    original.output = Some(out_dir.clone());
    assert_eq!(echoed, original);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "e.json", SMALL_EXPLORE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(polo(&["run", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(polo(&["run", &cfg, "--out", b.to_str().unwrap(), "--jobs", "2"]).status.success());
    for name in ["polo_seed0.csv", "greedy_seed0.csv", "mpc-no-value_seed0.csv"] {
        assert_eq!(
            fs::read(a.join("coverage").join(name)).unwrap(),
            fs::read(b.join("coverage").join(name)).unwrap()
        );
    }
    assert_eq!(
        fs::read(a.join("explore_summary.csv")).unwrap(),
        fs::read(b.join("explore_summary.csv")).unwrap()
    );
}

#[test]
fn verify_bounds_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "v.json",
        r#"{"command": "verify-bounds", "seeds": [1], "bounds": {"trials": 20, "contraction_cases": 100, "horizons": [1]}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = polo(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("bounds_H1_seed1.json").exists());
    assert!(out_dir.join("contraction_seed1.json").exists());
    let tight: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("tight_instance.json")).unwrap()).unwrap();
    assert!((tight["gap"].as_f64().unwrap() - 1.8).abs() < 1e-9);
}

#[test]
fn bound_violations_exit_1_and_are_serialized() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "v.json",
        r#"{"command": "verify-bounds", "seeds": [1], "bounds": {"trials": 20, "contraction_cases": 10, "horizons": [2]}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = polo(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("bounds_H2_seed1.json")).unwrap()).unwrap();
    let v = &report["violations"][0];
    assert!(v["gap"].as_f64().unwrap() > v["bound"].as_f64().unwrap());
    assert!(v["mdp"]["next_state"].is_array() && v["v_hat"].is_array());
}

#[test]
fn run_logs_and_checkpoints_are_written() {
    let dir = TempDir::new().unwrap();
    let text = SMALL_EXPLORE.replacen("\"seeds\"", "\"run_logs\": true, \"checkpoints\": true, \"seeds\"", 1);
    let cfg = write(dir.path(), "e.json", &text);
    let out_dir = dir.path().join("out");
    assert!(polo(&["run", &cfg, "--out", out_dir.to_str().unwrap()]).status.success());
    let cp = out_dir.join("checkpoints").join("polo_seed0.json");
    assert!(cp.exists());
    assert!(!out_dir.join("checkpoints").join("mpc-no-value_seed0.json").exists());
    load_ensemble(&cp, 0).unwrap();
    let steps = fs::read_to_string(out_dir.join("runs").join("polo_seed0").join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 11);
}

#[test]
fn checkpoints_round_trip() {
    let dir = TempDir::new().unwrap();
    let ranges = [Bounds { lo: 0.0, hi: 1.0 }, Bounds { lo: -2.0, hi: 2.0 }];
    let ens = ValueEnsemble::new(EnsembleConfig::default(), &ranges, 11).unwrap();
    let path = dir.path().join("ens.json");
    save_ensemble(&path, &ens).unwrap();
    let back = load_ensemble(&path, 11).unwrap();
    for s in [[0.1, 0.5], [0.9, -1.5]] {
        for k in 0..ens.len() {
            assert_eq!(ens.member_predict(k, &s).unwrap(), back.member_predict(k, &s).unwrap());
        }
    }

    let net: DenseNet = ens.member(0).unwrap().trainable().clone();
    let path = dir.path().join("net.json");
    save_net(&path, &net).unwrap();
    assert_eq!(load_net(&path).unwrap(), net);
}
