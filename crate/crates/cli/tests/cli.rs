use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[problem]
id = "test1"
eps = 0.015625
d1 = 1
t_final = 0.05

[fidelity.high]
kind = "tsfp"
mesh = { n = 256 }

[uq]
M = 4
N = 2
k_max = 2
seed = 3
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn mfschrod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfschrod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(cfg: &Path, verb: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        verb,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ];
    args.extend_from_slice(extra);
    mfschrod(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn experiment_smoke_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("exp");
    let o = run(&cfg, "experiment", &out, &["--set", "uq.k_max=1", "--set", "uq.M=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("k,err_rho,err_current\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["uq"]["k_max"], 1);
    assert!(manifest["version"].is_string());
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, "experiment", &a, &[]).status.success());
    assert!(run(&cfg, "experiment", &b, &[]).status.success());
    assert_eq!(
        fs::read(a.join("errors.csv")).unwrap(),
        fs::read(b.join("errors.csv")).unwrap()
    );
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}K_max = 3\n"));
    let o = run(&cfg, "experiment", &tmp.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("uq.k_max"), "{}", stderr(&o));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn missing_config_is_a_config_error() {
    let o = mfschrod(&["solve", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_override_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = run(&cfg, "solve", &tmp.path().join("x"), &["--set", "problem.eps=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.eps"));
}

#[test]
fn invalid_mesh_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = run(&cfg, "experiment", &tmp.path().join("x"), &["--set", "fidelity.low.mesh.keep_threshold=2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("keep_threshold"));
}

#[test]
fn numerical_failure_exits_with_3_and_cleans_up() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("x");
    // A phase-space box outside the domain leaves every amplitude at zero.
    let o = run(
        &cfg,
        "experiment",
        &out,
        &["--set", "fidelity.low.mesh.q_min=5", "--set", "fidelity.low.mesh.q_max=6"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("offline"));
    assert!(!out.exists());
}

fn observables(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn solve_grids_match_configured_meshes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for fidelity in ["high", "low"] {
        let out = tmp.path().join(fidelity);
        let o = run(&cfg, "solve", &out, &["--set", &format!("solve.fidelity=\"{fidelity}\"")]);
        assert!(o.status.success(), "{}", stderr(&o));
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        let n = manifest["config"]["fidelity"][fidelity]["mesh"]["n"].as_u64().unwrap() as usize;
        let rows = observables(&out.join("observables.csv"));
        assert_eq!(rows.len(), n);
        let h = 2.0 / n as f64;
        for (j, r) in rows.iter().enumerate() {
            assert!((r[0] - j as f64 * h).abs() < 1e-12);
        }
    }
}

#[test]
fn offline_then_online_and_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    let o = run(&cfg, "offline", &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("pipeline.json").exists());
    let o = run(&cfg, "online", &out, &["--set", "solve.z=[0.5, -0.5, 0.25, 0.0]"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(observables(&out.join("surrogate.csv")).len(), 256);
    let o = run(&cfg, "bound", &out, &["--set", "bounds.k=1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(observables(&out.join("bounds.csv")).len(), 2);
}

#[test]
fn sc_table_and_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("sc");
    let o = run(&cfg, "sc-table", &out, &["--set", "sc.n_c=[2, 4]", "--set", "sc.n_ref=8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(observables(&out.join("sc_table.csv")).len(), 2);
    let out = tmp.path().join("dg");
    let o = run(&cfg, "diagnose", &out, &["--set", "diagnose.eps=[0.2, 0.1]"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(observables(&out.join("rho_z.csv")).len(), 2);
}
