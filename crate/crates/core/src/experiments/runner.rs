//! End-to-end runs: one function per CLI verb, each writing CSV tables and a
//! manifest into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::defaults::{default_meshes, FidelityRole, DEFAULTS_VERSION};
use super::models::{build_model, DiagonalSlice};
use super::problems::make_problem;
use crate::config::RunConfig;
use crate::csvio::{emit_csv, CsvTable};
use crate::error::{Error, Result};
use crate::grid::ObservablePair;
use crate::metrics::{mean_l2_error, relative_errors, rho_z_diagnostic, sc_error_table, BoundContext};
use crate::multifidelity::{
    evaluate_all, offline_build, quantity_of, surrogate_evaluate, CostReport, FidelityModel, Quantity,
    SurrogatePipeline,
};
use crate::sampling::{sample_uniform, RandomSample};

/// Seed of the independent test set, derived from the training seed.
pub fn test_seed(seed: u64) -> u64 {
    seed.wrapping_mul(6_364_136_223_846_793_005)
        .wrapping_add(1_442_695_040_888_963_407)
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

/// Evaluations performed during a run, per model.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunCosts {
    pub offline: CostReport,
    pub test_high_runs: usize,
    pub test_high_seconds: f64,
    pub test_inference_runs: usize,
    pub test_inference_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub verb: String,
    pub defaults_version: u32,
    pub seed: u64,
    pub test_seed: u64,
    /// SHA-256 of `config_toml`.
    pub config_sha256: String,
    pub config_toml: String,
    pub config: RunConfig,
    pub timings: Vec<StageTiming>,
    pub costs: RunCosts,
    pub files: Vec<String>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
    /// Rows of `errors.csv` when the run computed them.
    pub errors: Option<CsvTable>,
    pub bounds: Option<CsvTable>,
    pub sc_table: Option<CsvTable>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tracks written files and removes them unless the run completes.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            done: false,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let p = self.path(name);
        emit_csv(table, &p)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    verb: &'static str,
    out: Outputs,
    timings: Vec<StageTiming>,
    costs: RunCosts,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, verb: &'static str) -> Result<Self> {
        Ok(Self {
            cfg,
            verb,
            out: Outputs::open(&cfg.outputs.dir)?,
            timings: Vec::new(),
            costs: RunCosts::default(),
        })
    }

    fn stage<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let r = f(self).map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        });
        self.timings.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        r
    }

    fn finish(mut self) -> Result<(PathBuf, Vec<PathBuf>, Manifest)> {
        let config_toml = self.cfg.to_toml()?;
        let mut manifest = Manifest {
            tool: "mfschrod",
            version: env!("CARGO_PKG_VERSION"),
            verb: self.verb.to_string(),
            defaults_version: DEFAULTS_VERSION,
            seed: self.cfg.uq.seed,
            test_seed: test_seed(self.cfg.uq.seed),
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config_toml,
            config: self.cfg.clone(),
            timings: std::mem::take(&mut self.timings),
            costs: std::mem::take(&mut self.costs),
            files: Vec::new(),
        };
        let path = self.out.path("manifest.json");
        manifest.files = self
            .out
            .files
            .iter()
            .filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        self.out.done = true;
        Ok((self.out.dir.clone(), self.out.files.clone(), manifest))
    }
}

/// The configured model for `role`.
pub fn model_for_role(cfg: &RunConfig, role: FidelityRole) -> Result<Arc<dyn FidelityModel>> {
    let entry = cfg.fidelity.get(role).ok_or_else(|| {
        Error::config("fidelity.medium", "this run needs a [fidelity.medium] section")
    })?;
    build_model(&cfg.problem_spec()?, &entry.mesh)
}

fn inference_role(cfg: &RunConfig) -> FidelityRole {
    if cfg.fidelity.medium.is_some() {
        FidelityRole::Medium
    } else {
        FidelityRole::Low
    }
}

fn observables_table(o: &ObservablePair) -> CsvTable {
    CsvTable {
        headers: vec!["x".into(), "rho".into(), "current".into()],
        columns: vec![o.grid.nodes(), o.rho.clone(), o.current.clone()],
    }
}

fn solve_point(cfg: &RunConfig, dim: usize) -> Result<RandomSample> {
    match &cfg.solve.z {
        Some(z) => RandomSample::new(z.clone()),
        None => Ok(RandomSample::zeros(dim)),
    }
}

fn build_pipeline(run: &mut Run) -> Result<SurrogatePipeline> {
    let cfg = run.cfg;
    let (low, medium, high) = run.stage("setup", |_| {
        let medium = match cfg.fidelity.medium {
            Some(_) => Some(model_for_role(cfg, FidelityRole::Medium)?),
            None => None,
        };
        Ok((
            model_for_role(cfg, FidelityRole::Low)?,
            medium,
            model_for_role(cfg, FidelityRole::High)?,
        ))
    })?;
    run.stage("offline", |r| {
        let training = sample_uniform(low.random_dim(), cfg.uq.m, cfg.uq.seed);
        let pipe = offline_build(
            low.as_ref(),
            medium.as_deref(),
            high.as_ref(),
            &training,
            cfg.uq.k_max,
            cfg.uq.tol,
        )?;
        r.costs.offline = pipe.costs.clone();
        Ok(pipe)
    })
}

/// High-fidelity and inference outputs on the independent test set.
struct TestSet {
    high: Vec<ObservablePair>,
    inference: Vec<ObservablePair>,
}

fn test_set(run: &mut Run) -> Result<TestSet> {
    let cfg = run.cfg;
    run.stage("test-set", |r| {
        let high = model_for_role(cfg, FidelityRole::High)?;
        let inf = model_for_role(cfg, inference_role(cfg))?;
        let samples = sample_uniform(high.random_dim(), cfg.uq.n, test_seed(cfg.uq.seed));
        let t = Instant::now();
        let high_obs = evaluate_all(high.as_ref(), &samples)?;
        r.costs.test_high_runs = samples.len();
        r.costs.test_high_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let inference = evaluate_all(inf.as_ref(), &samples)?;
        r.costs.test_inference_runs = samples.len();
        r.costs.test_inference_seconds = t.elapsed().as_secs_f64();
        Ok(TestSet {
            high: high_obs,
            inference,
        })
    })
}

/// `Err_1`, `Err_2` of every prefix `r = 1..=K` over the test set.
pub fn error_curve(pipe: &SurrogatePipeline, high: &[ObservablePair], inference: &[ObservablePair]) -> Result<CsvTable> {
    let mut table = CsvTable::new(&["k", "err_rho", "err_current"]);
    for r in 1..=pipe.k() {
        let prefix = pipe.truncated(r)?;
        let approx = inference
            .iter()
            .map(|o| prefix.combine_from(o))
            .collect::<Result<Vec<_>>>()?;
        let pick = |s: &[ObservablePair], q| s.iter().map(|o| quantity_of(o, q).to_vec()).collect::<Vec<_>>();
        let e1 = mean_l2_error(&pick(high, Quantity::Rho), &pick(&approx, Quantity::Rho))?;
        let e2 = mean_l2_error(&pick(high, Quantity::Current), &pick(&approx, Quantity::Current))?;
        table.push_row(&[r as f64, e1, e2])?;
    }
    Ok(table)
}

/// Per-sample bounds and true relative errors at prefix length `k`.
pub fn bound_table(
    pipe: &SurrogatePipeline,
    k: usize,
    c1: f64,
    c2: f64,
    high: &[ObservablePair],
    inference: &[ObservablePair],
) -> Result<CsvTable> {
    let ctx = BoundContext::new(pipe, k, c1, c2)?;
    let mut table = CsvTable::new(&[
        "sample",
        "bound_rho",
        "bound_current",
        "rel_err_rho",
        "rel_err_current",
        "covered",
    ]);
    for (j, (hi, inf)) in high.iter().zip(inference).enumerate() {
        let b = ctx.bound(inf);
        let e = relative_errors(hi, &ctx.prefix().combine_from(inf)?);
        let covered = if b.0 >= e.0 && b.1 >= e.1 { 1.0 } else { 0.0 };
        table.push_row(&[j as f64, b.0, b.1, e.0, e.1, covered])?;
    }
    Ok(table)
}

fn bound_k(cfg: &RunConfig, pipe: &SurrogatePipeline) -> usize {
    cfg.bounds.k.unwrap_or(pipe.k().saturating_sub(1))
}

fn sc_table(cfg: &RunConfig) -> Result<CsvTable> {
    let high = model_for_role(cfg, FidelityRole::High)?;
    let t = sc_error_table(&DiagonalSlice::new(high), &cfg.sc.n_c, cfg.sc.n_ref)?;
    let mut table = CsvTable::new(&["n_c", "err_rho", "err_current"]);
    for i in 0..t.n_c.len() {
        table.push_row(&[t.n_c[i] as f64, t.err_rho[i], t.err_current[i]])?;
    }
    Ok(table)
}

fn summary(run: Run, errors: Option<CsvTable>, bounds: Option<CsvTable>, sc: Option<CsvTable>) -> Result<RunSummary> {
    let (dir, files, manifest) = run.finish()?;
    Ok(RunSummary {
        dir,
        files,
        manifest,
        errors,
        bounds,
        sc_table: sc,
    })
}

/// Offline build, error sweep over `r = 1..=K`, and the optional bound and
/// collocation stages.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "experiment")?;
    let pipe = build_pipeline(&mut run)?;
    let tests = test_set(&mut run)?;
    let errors = run.stage("errors", |r| {
        let t = error_curve(&pipe, &tests.high, &tests.inference)?;
        r.out.csv("errors.csv", &t)?;
        Ok(t)
    })?;
    let bounds = if cfg.bounds.enabled {
        Some(run.stage("bounds", |r| {
            let t = bound_table(&pipe, bound_k(cfg, &pipe), cfg.bounds.c1, cfg.bounds.c2, &tests.high, &tests.inference)?;
            r.out.csv("bounds.csv", &t)?;
            Ok(t)
        })?)
    } else {
        None
    };
    let sc = if cfg.sc.enabled {
        Some(run.stage("sc", |r| {
            let t = sc_table(cfg)?;
            r.out.csv("sc_table.csv", &t)?;
            Ok(t)
        })?)
    } else {
        None
    };
    run.stage("archive", |r| {
        let p = r.out.path("pipeline.json");
        pipe.save(&p)
    })?;
    summary(run, Some(errors), bounds, sc)
}

/// One solver run at `solve.z`, written as `observables.csv`.
pub fn run_solve(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "solve")?;
    run.stage("solve", |r| {
        let model = model_for_role(cfg, cfg.solve.fidelity)?;
        let z = solve_point(cfg, model.random_dim())?;
        let obs = evaluate_all(model.as_ref(), &[z])?.remove(0);
        r.out.csv("observables.csv", &observables_table(&obs))
    })?;
    summary(run, None, None, None)
}

/// Offline stage only; writes the pipeline archive.
pub fn run_offline(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "offline")?;
    let pipe = build_pipeline(&mut run)?;
    run.stage("archive", |r| {
        let p = cfg.outputs.archive_path();
        if p.parent() == Some(r.out.dir.as_path()) {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let p = r.out.path(&name);
            pipe.save(&p)
        } else {
            pipe.save(&p)
        }
    })?;
    summary(run, None, None, None)
}

fn load_archive(cfg: &RunConfig) -> Result<SurrogatePipeline> {
    SurrogatePipeline::load(&cfg.outputs.archive_path())
}

/// Surrogate at `solve.z` from a saved archive, written as `surrogate.csv`.
pub fn run_online(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "online")?;
    run.stage("online", |r| {
        let pipe = load_archive(cfg)?;
        let inf = model_for_role(cfg, inference_role(cfg))?;
        let z = solve_point(cfg, inf.random_dim())?;
        let obs = surrogate_evaluate(&pipe, inf.as_ref(), &z)?;
        r.out.csv("surrogate.csv", &observables_table(&obs))
    })?;
    summary(run, None, None, None)
}

/// Empirical bounds on the test set from a saved archive.
pub fn run_bound(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "bound")?;
    let pipe = run.stage("load", |_| load_archive(cfg))?;
    let tests = test_set(&mut run)?;
    let bounds = run.stage("bounds", |r| {
        let t = bound_table(&pipe, bound_k(cfg, &pipe), cfg.bounds.c1, cfg.bounds.c2, &tests.high, &tests.inference)?;
        r.out.csv("bounds.csv", &t)?;
        Ok(t)
    })?;
    summary(run, None, Some(bounds), None)
}

/// Collocation errors of the high-fidelity model on the diagonal `z_k = z`.
pub fn run_sc_table(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "sc-table")?;
    let sc = run.stage("sc", |r| {
        let t = sc_table(cfg)?;
        r.out.csv("sc_table.csv", &t)?;
        Ok(t)
    })?;
    summary(run, None, None, Some(sc))
}

/// `||d rho / dz||` of the high-fidelity solver for each `diagnose.eps`,
/// with default meshes at that `eps`.
pub fn run_diagnose(cfg: &RunConfig) -> Result<RunSummary> {
    let mut run = Run::new(cfg, "diagnose")?;
    run.stage("diagnose", |r| {
        let kind = cfg.fidelity.high.kind();
        let model_for = |eps: f64| -> Result<Box<dyn FidelityModel>> {
            let p = &cfg.problem;
            let spec = make_problem(p.id, eps, p.d1)?
                .with_t_final(p.t_final)?
                .with_p_range(p.p_min, p.p_max)?;
            let mesh = default_meshes(p.id, eps).for_role(kind, FidelityRole::High);
            Ok(Box::new(DiagonalSlice::new(build_model(&spec, &mesh)?)))
        };
        let norms = rho_z_diagnostic(&model_for, &cfg.diagnose.eps, cfg.diagnose.dz)?;
        let mut t = CsvTable::new(&["eps", "rho_z_norm"]);
        for (e, n) in cfg.diagnose.eps.iter().zip(norms) {
            t.push_row(&[*e, n])?;
        }
        r.out.csv("rho_z.csv", &t)
    })?;
    summary(run, None, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn smoke(dir: &Path, extra: &[&str]) -> RunConfig {
        let mut o: Vec<String> = vec![
            "uq.M=2".into(),
            "uq.N=2".into(),
            "uq.k_max=1".into(),
            "problem.t_final=0.05".into(),
            "fidelity.high.mesh.n=256".into(),
            format!("outputs.dir=\"{}\"", dir.display()),
        ];
        o.extend(extra.iter().map(|s| s.to_string()));
        parse_config("[problem]\nid = \"test1\"\neps = 0.015625\nd1 = 1\n", &o).unwrap()
    }

    #[test]
    fn smoke_run_writes_one_error_row() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let s = run_experiment(&smoke(&dir, &[])).unwrap();
        let text = fs::read_to_string(dir.join("errors.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("k,err_rho,err_current\n"));
        assert_eq!(s.errors.unwrap().rows(), 1);
        assert!(dir.join("manifest.json").exists());
        assert!(dir.join("pipeline.json").exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        run_experiment(&smoke(&a, &["uq.M=4", "uq.k_max=2"])).unwrap();
        run_experiment(&smoke(&b, &["uq.M=4", "uq.k_max=2"])).unwrap();
        assert_eq!(
            fs::read(a.join("errors.csv")).unwrap(),
            fs::read(b.join("errors.csv")).unwrap()
        );
    }

    #[test]
    fn failed_stage_is_named_and_cleaned_up() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        // One training point cannot give the second point the bound needs.
        let cfg = smoke(&dir, &["bounds.enabled=true"]);
        let e = run_experiment(&cfg).unwrap_err();
        assert!(matches!(e, Error::Stage { stage: "bounds", .. }), "{e}");
        assert!(!dir.exists());
    }

    #[test]
    fn test_seed_differs() {
        assert_ne!(test_seed(1), 1);
        assert_eq!(test_seed(7), test_seed(7));
    }
}
