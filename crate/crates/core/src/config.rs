//! Run configuration: TOML text, `--set` overrides, strict schema, defaults.
//!
//! ```toml
//! [problem]
//! id = "test1"
//! eps = 0.015625
//! d1 = 5
//!
//! [fidelity.low]
//! kind = "fga"
//!
//! [fidelity.high]
//! kind = "tsfp"
//! mesh = { dt = 1e-3 }
//!
//! [uq]
//! M = 200
//! N = 100
//! k_max = 10
//! ```
//!
//! Every omitted value is filled in, so the resolved [`RunConfig`] written to
//! a manifest parses back to itself.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiments::defaults::{FidelityRole, FgaMesh, LsMesh, MeshSpec, SolverKind, TsfpMesh};
use crate::experiments::models::build_model;
use crate::experiments::problems::{make_problem, ProblemId, ProblemSpec};
use crate::grid::SpatialGrid1D;
use crate::levelset::{cfl_timestep, PhaseGrid};
use crate::sampling::RandomSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub id: ProblemId,
    pub eps: f64,
    pub d1: usize,
    pub t_final: f64,
    pub p_min: f64,
    pub p_max: f64,
}

/// One fidelity level: solver kind plus its fully resolved mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityEntry {
    pub mesh: MeshSpec,
}

impl FidelityEntry {
    pub fn kind(&self) -> SolverKind {
        self.mesh.kind()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    kind: SolverKind,
    mesh: Value,
}

impl Serialize for FidelityEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let mesh = match &self.mesh {
            MeshSpec::Tsfp(m) => Value::try_from(m),
            MeshSpec::Fga(m) => Value::try_from(m),
            MeshSpec::Ls(m) => Value::try_from(m),
        }
        .map_err(S::Error::custom)?;
        RawEntry {
            kind: self.kind(),
            mesh,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FidelityEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawEntry::deserialize(d)?;
        let mesh = match raw.kind {
            SolverKind::Tsfp => raw.mesh.try_into::<TsfpMesh>().map(MeshSpec::Tsfp),
            SolverKind::Fga => raw.mesh.try_into::<FgaMesh>().map(MeshSpec::Fga),
            SolverKind::Ls => raw.mesh.try_into::<LsMesh>().map(MeshSpec::Ls),
        }
        .map_err(D::Error::custom)?;
        Ok(FidelityEntry { mesh })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityConfig {
    pub low: FidelityEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium: Option<FidelityEntry>,
    pub high: FidelityEntry,
}

impl FidelityConfig {
    pub fn get(&self, role: FidelityRole) -> Option<&FidelityEntry> {
        match role {
            FidelityRole::Low => Some(&self.low),
            FidelityRole::Medium => self.medium.as_ref(),
            FidelityRole::High => Some(&self.high),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqConfig {
    /// Training samples.
    #[serde(rename = "M")]
    pub m: usize,
    /// Independent test samples.
    #[serde(rename = "N")]
    pub n: usize,
    pub k_max: usize,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub enabled: bool,
    pub c1: f64,
    pub c2: f64,
    /// Prefix length; one less than the number of selected points when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScConfig {
    pub enabled: bool,
    pub n_c: Vec<usize>,
    pub n_ref: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub eps: Vec<f64>,
    pub dz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub fidelity: FidelityRole,
    /// Defaults to the zero vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    pub dir: PathBuf,
    /// Pipeline archive; `dir/pipeline.json` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archive: Option<PathBuf>,
}

impl OutputsConfig {
    pub fn archive_path(&self) -> PathBuf {
        self.archive.clone().unwrap_or_else(|| self.dir.join("pipeline.json"))
    }
}

/// A fully resolved, validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub fidelity: FidelityConfig,
    pub uq: UqConfig,
    pub bounds: BoundsConfig,
    pub sc: ScConfig,
    pub diagnose: DiagnoseConfig,
    pub solve: SolveConfig,
    pub outputs: OutputsConfig,
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// The benchmark problem with the configured final time and momentum range.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        make_problem(p.id, p.eps, p.d1)?
            .with_t_final(p.t_final)?
            .with_p_range(p.p_min, p.p_max)
    }
}

const SECTIONS: &[&str] = &["problem", "fidelity", "uq", "bounds", "sc", "diagnose", "solve", "outputs"];
const ROLES: &[&str] = &["low", "medium", "high"];

fn allowed_keys(path: &str, kind: Option<SolverKind>) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => SECTIONS,
        "problem" => &["id", "eps", "d1", "t_final", "p_min", "p_max"],
        "fidelity" => ROLES,
        "fidelity.low" | "fidelity.medium" | "fidelity.high" => &["kind", "mesh"],
        "uq" => &["M", "N", "k_max", "tol", "seed"],
        "bounds" => &["enabled", "c1", "c2", "k"],
        "sc" => &["enabled", "n_c", "n_ref"],
        "diagnose" => &["eps", "dz"],
        "solve" => &["fidelity", "z"],
        "outputs" => &["dir", "archive"],
        p if p.ends_with(".mesh") => match kind? {
            SolverKind::Tsfp => &["n", "dt"],
            SolverKind::Fga => &[
                "n",
                "dt",
                "quad_n",
                "nq",
                "np",
                "q_min",
                "q_max",
                "p_min",
                "p_max",
                "keep_threshold",
            ],
            SolverKind::Ls => &["nx", "dp", "p_min", "p_max", "cfl", "kappa", "kernel", "dt"],
        },
        _ => return None,
    })
}

/// Closest allowed key: a case-insensitive match first, then the nearest
/// by edit distance if it is close enough.
fn suggest(key: &str, allowed: &[&str]) -> Option<String> {
    if let Some(k) = allowed.iter().find(|k| k.eq_ignore_ascii_case(key)) {
        return Some(k.to_string());
    }
    allowed
        .iter()
        .map(|k| (strsim::levenshtein(&key.to_lowercase(), &k.to_lowercase()), k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k.to_string())
}

/// Line of the first occurrence of `path` (or of an ancestor assigned inline).
fn key_line(text: &str, path: &str) -> Option<usize> {
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[') {
            section = h.trim_end_matches(']').trim().replace(' ', "");
            if section == path {
                return Some(i + 1);
            }
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        let k = k.trim().replace([' ', '"'], "");
        let full = if section.is_empty() {
            k
        } else {
            format!("{section}.{k}")
        };
        if full == path || path.starts_with(&format!("{full}.")) {
            return Some(i + 1);
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            key: Some(key.to_string()),
            line: key_line(self.text, key),
            message: message.into(),
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn check_keys(ctx: &Ctx, table: &Table, path: &str, kind: Option<SolverKind>) -> Result<()> {
    let Some(allowed) = allowed_keys(path, kind) else {
        return Ok(());
    };
    for (k, v) in table {
        let full = join(path, k);
        if !allowed.contains(&k.as_str()) {
            let hint = match suggest(k, allowed) {
                Some(s) => format!("; did you mean `{}`?", join(path, &s)),
                None => format!("; expected one of: {}", allowed.join(", ")),
            };
            return Err(ctx.err(&full, format!("unknown key `{full}`{hint}")));
        }
        if let Value::Table(sub) = v {
            let sub_kind = if full.starts_with("fidelity.") && k == "mesh" {
                kind
            } else {
                role_kind(ctx, sub, &full)?
            };
            check_keys(ctx, sub, &full, sub_kind)?;
        }
    }
    Ok(())
}

fn role_kind(ctx: &Ctx, table: &Table, path: &str) -> Result<Option<SolverKind>> {
    if !ROLES.iter().any(|r| path == format!("fidelity.{r}")) {
        return Ok(None);
    }
    match table.get("kind") {
        None => Ok(None),
        Some(v) => {
            let key = format!("{path}.kind");
            v.clone()
                .try_into::<SolverKind>()
                .map(Some)
                .map_err(|_| ctx.err(&key, format!("`{key}` must be one of \"tsfp\", \"fga\", \"ls\"")))
        }
    }
}

/// Parse the value of a `--set` override as TOML, falling back to a bare string.
fn parse_override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Apply `key.path=value` on top of `table`, creating sections as needed.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::Config {
        key: None,
        line: None,
        message: format!("override `{spec}` is not of the form key=value"),
    })?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::config(key, format!("`{p}` in `{key}` is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

fn section<'a>(root: &'a mut Table, name: &str) -> Result<&'a mut Table> {
    let v = root
        .entry(name.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match v {
        Value::Table(t) => Ok(t),
        _ => Err(Error::config(name, format!("`{name}` must be a section"))),
    }
}

fn fill(t: &mut Table, key: &str, v: Value) {
    t.entry(key.to_string()).or_insert(v);
}

fn typed<T: serde::de::DeserializeOwned>(ctx: &Ctx, t: &Table, path: &str, key: &str) -> Result<T> {
    let full = join(path, key);
    let v = t
        .get(key)
        .ok_or_else(|| ctx.err(&full, format!("missing required key `{full}`")))?;
    v.clone()
        .try_into::<T>()
        .map_err(|e| ctx.err(&full, format!("invalid value for `{full}`: {}", e.to_string().trim())))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Value::try_from(v).map_err(|e| Error::Serde(e.to_string()))
}

fn merge(base: Value, over: &Table) -> Value {
    match base {
        Value::Table(mut b) => {
            for (k, v) in over {
                b.insert(k.clone(), v.clone());
            }
            Value::Table(b)
        }
        other => other,
    }
}

/// Parse, override, validate and fill defaults.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let ctx = Ctx { text };
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        Error::Config {
            key: None,
            line,
            message: format!("syntax error: {}", e.message()),
        }
    })?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    check_keys(&ctx, &root, "", None)?;

    // problem
    let problem = section(&mut root, "problem")?;
    let id: ProblemId = {
        let s: String = typed(&ctx, problem, "problem", "id")?;
        s.parse().map_err(|e: Error| ctx.err("problem.id", e.to_string()))?
    };
    let eps: f64 = typed(&ctx, problem, "problem", "eps")?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ctx.err("problem.eps", format!("`problem.eps` must lie in (0, 1], got {eps}")));
    }
    fill(problem, "d1", Value::Integer(5));
    fill(problem, "t_final", Value::Float(id.default_t_final()));
    let (pa, pb) = id.default_p_range();
    fill(problem, "p_min", Value::Float(pa));
    fill(problem, "p_max", Value::Float(pb));
    let d1: usize = typed(&ctx, problem, "problem", "d1")?;
    if d1 == 0 {
        return Err(ctx.err("problem.d1", "`problem.d1` must be at least 1"));
    }
    let p_min: f64 = typed(&ctx, problem, "problem", "p_min")?;
    let p_max: f64 = typed(&ctx, problem, "problem", "p_max")?;
    let t_final: f64 = typed(&ctx, problem, "problem", "t_final")?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(ctx.err("problem.t_final", format!("`problem.t_final` must be >= 0, got {t_final}")));
    }
    if !(p_max > p_min) {
        return Err(ctx.err("problem.p_max", format!("momentum range [{p_min}, {p_max}] is empty")));
    }
    let spec = make_problem(id, eps, d1)
        .and_then(|s| s.with_t_final(t_final))
        .and_then(|s| s.with_p_range(p_min, p_max))
        .map_err(|e| ctx.err("problem", e.to_string()))?;
    let mut meshes = spec.meshes;
    meshes.ls.p_min = p_min;
    meshes.ls.p_max = p_max;

    // fidelity
    let fid = section(&mut root, "fidelity")?;
    for (role_name, role, default_kind) in [
        ("low", FidelityRole::Low, Some(SolverKind::Fga)),
        ("medium", FidelityRole::Medium, None),
        ("high", FidelityRole::High, Some(SolverKind::Tsfp)),
    ] {
        let path = format!("fidelity.{role_name}");
        if default_kind.is_none() && !fid.contains_key(role_name) {
            continue;
        }
        let entry = section(fid, role_name)?;
        if let Some(k) = default_kind {
            fill(entry, "kind", Value::String(k.as_str().into()));
        }
        let kind: SolverKind = typed(&ctx, entry, &path, "kind")?;
        let user_mesh = match entry.get("mesh") {
            None => Table::new(),
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(ctx.err(&format!("{path}.mesh"), format!("`{path}.mesh` must be a table"))),
        };
        let base = match meshes.for_role(kind, role) {
            MeshSpec::Tsfp(m) => to_value(&m)?,
            MeshSpec::Fga(m) => to_value(&m)?,
            MeshSpec::Ls(m) => to_value(&m)?,
        };
        entry.insert("mesh".into(), merge(base, &user_mesh));
    }

    // remaining sections
    let uq = section(&mut root, "uq")?;
    fill(uq, "M", Value::Integer(200));
    fill(uq, "N", Value::Integer(100));
    fill(uq, "k_max", Value::Integer(10));
    fill(uq, "tol", Value::Float(1e-12));
    fill(uq, "seed", Value::Integer(1));
    let b = section(&mut root, "bounds")?;
    fill(b, "enabled", Value::Boolean(false));
    fill(b, "c1", Value::Float(1.0));
    fill(b, "c2", Value::Float(1.0));
    let sc = section(&mut root, "sc")?;
    fill(sc, "enabled", Value::Boolean(false));
    fill(
        sc,
        "n_c",
        Value::Array([8, 16, 32, 64, 128].into_iter().map(Value::Integer).collect()),
    );
    fill(sc, "n_ref", Value::Integer(256));
    let dg = section(&mut root, "diagnose")?;
    fill(dg, "eps", Value::Array([0.1, 0.05, 0.025].into_iter().map(Value::Float).collect()));
    fill(dg, "dz", Value::Float(1e-3));
    let sv = section(&mut root, "solve")?;
    fill(sv, "fidelity", Value::String("high".into()));
    let out = section(&mut root, "outputs")?;
    fill(out, "dir", Value::String("out".into()));

    let mut cfg = RunConfig {
        problem: ProblemConfig {
            id,
            eps,
            d1,
            t_final,
            p_min,
            p_max,
        },
        fidelity: typed(&ctx, &root, "", "fidelity")?,
        uq: typed(&ctx, &root, "", "uq")?,
        bounds: typed(&ctx, &root, "", "bounds")?,
        sc: typed(&ctx, &root, "", "sc")?,
        diagnose: typed(&ctx, &root, "", "diagnose")?,
        solve: typed(&ctx, &root, "", "solve")?,
        outputs: typed(&ctx, &root, "", "outputs")?,
    };
    validate(&ctx, &mut cfg, &spec)?;
    Ok(cfg)
}

fn validate(ctx: &Ctx, cfg: &mut RunConfig, spec: &ProblemSpec) -> Result<()> {
    let uq = &cfg.uq;
    if uq.m == 0 || uq.n == 0 {
        return Err(ctx.err("uq.M", "`uq.M` and `uq.N` must be at least 1"));
    }
    if uq.k_max == 0 || uq.k_max > uq.m {
        return Err(ctx.err(
            "uq.k_max",
            format!("`uq.k_max` must lie in [1, uq.M = {}], got {}", uq.m, uq.k_max),
        ));
    }
    if !(uq.tol >= 0.0) {
        return Err(ctx.err("uq.tol", format!("`uq.tol` must be >= 0, got {}", uq.tol)));
    }
    if uq.seed > i64::MAX as u64 {
        return Err(ctx.err("uq.seed", "`uq.seed` must fit in a signed 64-bit integer"));
    }
    if !(cfg.bounds.c1 > 0.0 && cfg.bounds.c2 > 0.0) {
        return Err(ctx.err("bounds.c1", "`bounds.c1` and `bounds.c2` must be > 0"));
    }
    if let Some(k) = cfg.bounds.k {
        if k == 0 || k >= uq.k_max {
            return Err(ctx.err(
                "bounds.k",
                format!("`bounds.k` must lie in [1, uq.k_max - 1 = {}], got {k}", uq.k_max - 1),
            ));
        }
    }
    if cfg.sc.n_c.contains(&0) || cfg.sc.n_ref == 0 {
        return Err(ctx.err("sc.n_c", "collocation sizes must be at least 1"));
    }
    if let Some(e) = cfg.diagnose.eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(ctx.err("diagnose.eps", format!("diagnostic eps must lie in (0, 1], got {e}")));
    }
    if !(cfg.diagnose.dz > 0.0 && cfg.diagnose.dz < 1.0) {
        return Err(ctx.err("diagnose.dz", "`diagnose.dz` must lie in (0, 1)"));
    }
    if let Some(z) = &cfg.solve.z {
        if z.len() != spec.random_dim() {
            return Err(ctx.err(
                "solve.z",
                format!("`solve.z` has {} entries, the problem has dimension {}", z.len(), spec.random_dim()),
            ));
        }
        RandomSample::new(z.clone()).map_err(|e| ctx.err("solve.z", e.to_string()))?;
    }
    if cfg.solve.fidelity == FidelityRole::Medium && cfg.fidelity.medium.is_none() {
        return Err(ctx.err("solve.fidelity", "`solve.fidelity = \"medium\"` needs a [fidelity.medium] section"));
    }
    for (name, role) in [
        ("low", FidelityRole::Low),
        ("medium", FidelityRole::Medium),
        ("high", FidelityRole::High),
    ] {
        let Some(entry) = cfg.fidelity.get(role) else {
            continue;
        };
        let path = format!("fidelity.{name}.mesh");
        if let MeshSpec::Ls(m) = entry.mesh {
            if let Some(dt) = m.dt {
                let limit = ls_cfl_limit(spec, &m).map_err(|e| ctx.err(&path, e.to_string()))?;
                if dt > limit {
                    let key = format!("{path}.dt");
                    return Err(ctx.err(
                        &key,
                        format!("`{key}` = {dt} violates the CFL bound {limit} for this mesh"),
                    ));
                }
            }
        }
        build_model(spec, &entry.mesh).map_err(|e| ctx.err(&path, e.to_string()))?;
    }
    Ok(())
}

/// Largest stable level-set step over the extreme corners of the random box,
/// where every random potential here attains its largest force.
pub fn ls_cfl_limit(spec: &ProblemSpec, mesh: &LsMesh) -> Result<f64> {
    let xgrid = SpatialGrid1D::new(spec.domain.0, spec.domain.1, mesh.nx)?;
    let grid = PhaseGrid::with_dp(xgrid, mesh.p_min, mesh.p_max, mesh.dp)?;
    let d = spec.random_dim();
    let mut limit = f64::INFINITY;
    for c in [0.0, 1.0, -1.0] {
        let z = RandomSample::new(vec![c; d])?;
        let v1 = |x: f64| (spec.potential.gradient)(x, &z);
        limit = limit.min(cfl_timestep(&grid, &v1, 1.0)?);
    }
    Ok(limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem]\nid = \"test1\"\neps = 0.015625\n";

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.problem.d1, 5);
        assert_eq!(cfg.fidelity.low.kind(), SolverKind::Fga);
        assert_eq!(cfg.fidelity.high.kind(), SolverKind::Tsfp);
        assert!(cfg.fidelity.medium.is_none());
        let text = cfg.to_toml().unwrap();
        let again = parse_config(&text, &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn wrong_case_key_gets_suggestion() {
        let text = format!("{MINIMAL}\n[uq]\nK_max = 3\n");
        let e = parse_config(&text, &[]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("uq.k_max"), "{msg}");
        match e {
            Error::Config { line, key, .. } => {
                assert_eq!(line, Some(6));
                assert_eq!(key.as_deref(), Some("uq.K_max"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_mesh_key_is_rejected() {
        let text = format!("{MINIMAL}\n[fidelity.low]\nkind = \"ls\"\nmesh = {{ nq = 3 }}\n");
        let msg = parse_config(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("fidelity.low.mesh.nq"), "{msg}");
    }

    #[test]
    fn cfl_violation_reports_the_bound() {
        let text = format!("{MINIMAL}\n[fidelity.low]\nkind = \"ls\"\n[fidelity.low.mesh]\ndt = 0.5\n");
        let e = parse_config(&text, &[]).unwrap_err();
        let cfg = parse_config(MINIMAL, &["fidelity.low.kind=\"ls\"".into()]).unwrap();
        let MeshSpec::Ls(m) = cfg.fidelity.low.mesh else {
            panic!()
        };
        // dx = 0.01, dp = 0.1, max |p| = 2, V' = 0.
        let limit = 0.01 / 4.0;
        let spec = cfg.problem_spec().unwrap();
        assert!((ls_cfl_limit(&spec, &m).unwrap() - limit).abs() < 1e-15);
        let msg = e.to_string();
        assert!(msg.contains("fidelity.low.mesh.dt") && msg.contains(&limit.to_string()), "{msg}");
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = parse_config(
            MINIMAL,
            &["uq.M=7".into(), "uq.k_max=3".into(), "outputs.dir=runs/a".into()],
        )
        .unwrap();
        assert_eq!(cfg.uq.m, 7);
        assert_eq!(cfg.outputs.dir, PathBuf::from("runs/a"));
        let e = parse_config(MINIMAL, &["uq.k_max=300".into()]).unwrap_err();
        assert!(e.to_string().contains("uq.k_max"));
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let e = parse_config("[problem]\nid = \"test1\"\neps = = 1\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(3), .. }), "{e}");
        let e = parse_config("[problem]\nid = \"test1\"\neps = \"small\"\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(3), .. }), "{e}");
        let e = parse_config("[problem]\nid = \"test9\"\neps = 0.1\n", &[]).unwrap_err();
        assert!(e.is_config());
        assert!(parse_config("[problem]\nid = \"test1\"\n", &[]).is_err());
    }

    #[test]
    fn medium_mesh_defaults_to_coarse_tsfp() {
        let cfg = parse_config(MINIMAL, &["fidelity.medium.kind=tsfp".into()]).unwrap();
        match cfg.fidelity.medium.unwrap().mesh {
            MeshSpec::Tsfp(m) => assert_eq!(m.n, 200),
            other => panic!("{other:?}"),
        }
    }
}
