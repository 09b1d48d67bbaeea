//! Bi- and tri-fidelity collocation.
//!
//! Offline: evaluate the cheapest model on a training set, greedily pick `K`
//! important points from its snapshots, and run the expensive model only at
//! those points. Online: run the inference model (low, or medium in
//! tri-fidelity mode) at a new `z`, project its output onto the inference
//! snapshots at the important points with a Galerkin solve, and apply the
//! same coefficients to the high-fidelity snapshots.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ObservablePair, SpatialGrid1D};
use crate::sampling::RandomSample;

/// A solver mapping a random sample to observables on a fixed grid.
pub trait FidelityModel: Send + Sync {
    fn name(&self) -> &str;
    fn random_dim(&self) -> usize;
    fn grid(&self) -> SpatialGrid1D;
    fn evaluate(&self, z: &RandomSample) -> Result<ObservablePair>;
}

/// A [`FidelityModel`] backed by a closure.
pub struct FnModel<F> {
    name: String,
    dim: usize,
    grid: SpatialGrid1D,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&RandomSample) -> Result<ObservablePair> + Send + Sync,
{
    pub fn new(name: impl Into<String>, dim: usize, grid: SpatialGrid1D, f: F) -> Self {
        Self {
            name: name.into(),
            dim,
            grid,
            f,
        }
    }
}

impl<F> FidelityModel for FnModel<F>
where
    F: Fn(&RandomSample) -> Result<ObservablePair> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn random_dim(&self) -> usize {
        self.dim
    }

    fn grid(&self) -> SpatialGrid1D {
        self.grid
    }

    fn evaluate(&self, z: &RandomSample) -> Result<ObservablePair> {
        (self.f)(z)
    }
}

/// Evaluate `model` at every sample in parallel; results keep sample order.
pub fn evaluate_all(
    model: &dyn FidelityModel,
    samples: &[RandomSample],
) -> Result<Vec<ObservablePair>> {
    let results: Vec<Result<ObservablePair>> =
        samples.par_iter().map(|z| evaluate_one(model, z)).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(j, r)| {
            r.map_err(|e| Error::Model {
                model: model.name().to_string(),
                index: j,
                z: samples[j].as_slice().to_vec(),
                source: Box::new(e),
            })
        })
        .collect()
}

fn evaluate_one(model: &dyn FidelityModel, z: &RandomSample) -> Result<ObservablePair> {
    if z.dim() != model.random_dim() {
        return Err(Error::InvalidInput(format!(
            "sample has dimension {}, model expects {}",
            z.dim(),
            model.random_dim()
        )));
    }
    let obs = model.evaluate(z)?;
    if !obs.is_finite() {
        return Err(Error::Numerical("model output is not finite".into()));
    }
    Ok(obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Rho,
    Current,
    /// `rho` and `J` concatenated, each divided by its largest training norm.
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMatrix {
    pub columns: Vec<Vec<f64>>,
    pub samples: Vec<RandomSample>,
    pub ip_weight: f64,
}

impl SnapshotMatrix {
    pub fn new(columns: Vec<Vec<f64>>, samples: Vec<RandomSample>, ip_weight: f64) -> Result<Self> {
        if columns.is_empty() || columns.len() != samples.len() {
            return Err(Error::InvalidInput(format!(
                "need one column per sample and at least one, got {} columns and {} samples",
                columns.len(),
                samples.len()
            )));
        }
        let len = columns[0].len();
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidInput("snapshot columns differ in length".into()));
        }
        if !(ip_weight > 0.0) {
            return Err(Error::InvalidInput(format!(
                "inner-product weight must be positive, got {ip_weight}"
            )));
        }
        Ok(Self {
            columns,
            samples,
            ip_weight,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(a, b, self.ip_weight)
    }
}

pub fn weighted_dot(a: &[f64], b: &[f64], w: f64) -> f64 {
    w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

pub fn weighted_norm(a: &[f64], w: f64) -> f64 {
    weighted_dot(a, a, w).sqrt()
}

/// Snapshot columns for `quantity` from already computed observables.
pub fn snapshots_from_observables(
    obs: &[ObservablePair],
    samples: &[RandomSample],
    quantity: Quantity,
) -> Result<SnapshotMatrix> {
    let first = obs
        .first()
        .ok_or_else(|| Error::InvalidInput("no snapshots to assemble".into()))?;
    let h = first.grid.h();
    let columns = match quantity {
        Quantity::Rho => obs.iter().map(|o| o.rho.clone()).collect(),
        Quantity::Current => obs.iter().map(|o| o.current.clone()).collect(),
        Quantity::Stacked => {
            let scale = |get: fn(&ObservablePair) -> &Vec<f64>| {
                let m = obs.iter().map(|o| weighted_norm(get(o), h)).fold(0.0, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            };
            let sr = scale(|o| &o.rho);
            let sj = scale(|o| &o.current);
            obs.iter()
                .map(|o| {
                    o.rho
                        .iter()
                        .map(|v| v * sr)
                        .chain(o.current.iter().map(|v| v * sj))
                        .collect()
                })
                .collect()
        }
    };
    SnapshotMatrix::new(columns, samples.to_vec(), h)
}

pub fn build_snapshots(
    model: &dyn FidelityModel,
    samples: &[RandomSample],
    quantity: Quantity,
) -> Result<SnapshotMatrix> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    let obs = evaluate_all(model, samples)?;
    snapshots_from_observables(&obs, samples, quantity)
}

/// Greedy picks `indices` and the distance to the selected span seen at each
/// step. When the search stops because the distance fell below the tolerance,
/// that last distance is recorded too, so `residuals.len()` is `K` or `K + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub residuals: Vec<f64>,
}

impl SelectionResult {
    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Max-distance greedy selection by diagonally pivoted Cholesky on the Gram
/// matrix of all columns. Gram entries are formed on demand, one pivot column
/// per step.
pub fn greedy_select(snap: &SnapshotMatrix, k_max: usize, tol: f64) -> Result<SelectionResult> {
    let n = snap.len();
    if k_max == 0 || k_max > n {
        return Err(Error::InvalidInput(format!(
            "k_max must lie in 1..={n}, got {k_max}"
        )));
    }
    let mut diag: Vec<f64> = snap.columns.iter().map(|c| snap.inner(c, c)).collect();
    let mut factor: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut chosen = vec![false; n];
    let mut out = SelectionResult {
        indices: Vec::with_capacity(k_max),
        residuals: Vec::with_capacity(k_max + 1),
    };
    while out.indices.len() < k_max {
        let mut piv = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for (i, &d) in diag.iter().enumerate() {
            if !chosen[i] && d > best {
                best = d;
                piv = i;
            }
        }
        let residual = best.max(0.0).sqrt();
        out.residuals.push(residual);
        if residual < tol || piv == usize::MAX {
            break;
        }
        let pc = &snap.columns[piv];
        let col: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                if chosen[i] || i == piv {
                    return 0.0;
                }
                let g = snap.inner(&snap.columns[i], pc);
                let s: f64 = factor.iter().map(|l| l[i] * l[piv]).sum();
                (g - s) / residual
            })
            .collect();
        for (d, l) in diag.iter_mut().zip(&col) {
            *d -= l * l;
        }
        let mut col = col;
        col[piv] = residual;
        chosen[piv] = true;
        diag[piv] = 0.0;
        factor.push(col);
        out.indices.push(piv);
    }
    Ok(out)
}

/// Relative pivot size below which a basis vector is dropped from the Gramian.
pub const PIVOT_TRUNCATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinSystem {
    pub gram: Vec<Vec<f64>>,
    /// Lower Cholesky factor of the active block, row-major.
    pub chol: Vec<Vec<f64>>,
    pub lambda_min: f64,
    /// Basis positions (`0..K`) kept after pivot truncation.
    pub active: Vec<usize>,
    pub ip_weight: f64,
}

/// Gram matrix of `basis`, its truncated Cholesky factor and smallest eigenvalue.
pub fn gramian_of(basis: &[&[f64]], ip_weight: f64) -> Result<GalerkinSystem> {
    let k = basis.len();
    let mut gram = vec![vec![0.0; k]; k];
    for l in 0..k {
        for m in 0..=l {
            let g = weighted_dot(basis[l], basis[m], ip_weight);
            gram[l][m] = g;
            gram[m][l] = g;
        }
    }
    let max_diag = (0..k).map(|l| gram[l][l]).fold(0.0, f64::max);
    let mut active: Vec<usize> = Vec::with_capacity(k);
    let mut chol: Vec<Vec<f64>> = Vec::with_capacity(k);
    for l in 0..k {
        let mut row = Vec::with_capacity(active.len() + 1);
        for (a, &m) in active.iter().enumerate() {
            let s: f64 = (0..a).map(|b| row[b] * chol[a][b]).sum();
            row.push((gram[l][m] - s) / chol[a][a]);
        }
        let pivot = gram[l][l] - row.iter().map(|v| v * v).sum::<f64>();
        if max_diag > 0.0 && pivot >= PIVOT_TRUNCATION * max_diag {
            row.push(pivot.sqrt());
            chol.push(row);
            active.push(l);
        }
    }
    if active.is_empty() {
        return Err(Error::Numerical(
            "Gramian has no usable basis vector: every selected snapshot vanishes".into(),
        ));
    }
    let block = DMatrix::from_fn(active.len(), active.len(), |a, b| gram[active[a]][active[b]]);
    let lambda_min = SymmetricEigen::new(block)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(GalerkinSystem {
        gram,
        chol,
        lambda_min,
        active,
        ip_weight,
    })
}

pub fn assemble_gramian(snap: &SnapshotMatrix, indices: &[usize]) -> Result<GalerkinSystem> {
    let mut seen = vec![false; snap.len()];
    for &i in indices {
        if i >= snap.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidInput(format!(
                "selected index {i} is out of range or repeated"
            )));
        }
    }
    let basis: Vec<&[f64]> = indices.iter().map(|&i| snap.columns[i].as_slice()).collect();
    gramian_of(&basis, snap.ip_weight)
}

/// Solve `G c = g` with `g_k = <u, basis_k>` on the active block; inactive
/// coefficients are zero.
pub fn infer_coefficients(sys: &GalerkinSystem, basis: &[&[f64]], u: &[f64]) -> Vec<f64> {
    let na = sys.active.len();
    let g: Vec<f64> = sys
        .active
        .iter()
        .map(|&k| weighted_dot(u, basis[k], sys.ip_weight))
        .collect();
    let mut y = vec![0.0; na];
    for a in 0..na {
        let s: f64 = (0..a).map(|b| sys.chol[a][b] * y[b]).sum();
        y[a] = (g[a] - s) / sys.chol[a][a];
    }
    let mut x = vec![0.0; na];
    for a in (0..na).rev() {
        let s: f64 = (a + 1..na).map(|b| sys.chol[b][a] * x[b]).sum();
        x[a] = (y[a] - s) / sys.chol[a][a];
    }
    let mut c = vec![0.0; basis.len()];
    for (a, &k) in sys.active.iter().enumerate() {
        c[k] = x[a];
    }
    c
}

/// `sum_k c_k basis_k`.
pub fn combine(c: &[f64], basis: &[&[f64]]) -> Vec<f64> {
    let len = basis.first().map_or(0, |b| b.len());
    let mut out = vec![0.0; len];
    for (ck, b) in c.iter().zip(basis) {
        for (o, v) in out.iter_mut().zip(b.iter()) {
            *o += ck * v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    Bifidelity,
    Trifidelity,
}

/// Wall-clock seconds and run counts per model during the offline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub low_runs: usize,
    pub low_seconds: f64,
    pub medium_runs: usize,
    pub medium_seconds: f64,
    pub high_runs: usize,
    pub high_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQuantity<T> {
    pub rho: T,
    pub current: T,
}

impl<T> PerQuantity<T> {
    pub fn get(&self, q: Quantity) -> &T {
        match q {
            Quantity::Current => &self.current,
            _ => &self.rho,
        }
    }
}

/// Everything the online stage needs; model handles are supplied at call time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePipeline {
    pub mode: FidelityMode,
    pub low_model: String,
    pub medium_model: Option<String>,
    pub high_model: String,
    pub training: Vec<RandomSample>,
    pub selection: SelectionResult,
    /// Inference-model outputs at the selected points, in selection order.
    pub inference_snapshots: Vec<ObservablePair>,
    /// High-fidelity outputs at the selected points, in selection order.
    pub high_snapshots: Vec<ObservablePair>,
    pub systems: PerQuantity<GalerkinSystem>,
    pub costs: CostReport,
}

impl SurrogatePipeline {
    pub fn k(&self) -> usize {
        self.high_snapshots.len()
    }

    pub fn inference_model(&self) -> &str {
        match self.mode {
            FidelityMode::Bifidelity => &self.low_model,
            FidelityMode::Trifidelity => self.medium_model.as_deref().unwrap_or(&self.low_model),
        }
    }

    /// Selected points `z_{i_1}, ..., z_{i_K}`.
    pub fn points(&self) -> Vec<RandomSample> {
        self.selection
            .indices
            .iter()
            .map(|&i| self.training[i].clone())
            .collect()
    }

    pub fn inference_basis(&self, q: Quantity) -> Vec<&[f64]> {
        self.inference_snapshots.iter().map(|o| quantity_of(o, q)).collect()
    }

    pub fn high_basis(&self, q: Quantity) -> Vec<&[f64]> {
        self.high_snapshots.iter().map(|o| quantity_of(o, q)).collect()
    }

    /// The surrogate built from the first `k` selected points only.
    pub fn truncated(&self, k: usize) -> Result<SurrogatePipeline> {
        if k == 0 || k > self.k() {
            return Err(Error::InvalidInput(format!(
                "prefix length must lie in 1..={}, got {k}",
                self.k()
            )));
        }
        let mut out = self.clone();
        out.selection.indices.truncate(k);
        out.selection.residuals.truncate(k);
        out.inference_snapshots.truncate(k);
        out.high_snapshots.truncate(k);
        out.systems = gramians_for(&out.inference_snapshots)?;
        Ok(out)
    }

    /// Surrogate output given the inference model's output at the query point.
    pub fn combine_from(&self, inference: &ObservablePair) -> Result<ObservablePair> {
        let grid = self.inference_snapshots[0].grid;
        if inference.grid != grid {
            return Err(Error::InvalidInput(
                "inference output lives on a different grid than the pipeline".into(),
            ));
        }
        let part = |q: Quantity| {
            let c = infer_coefficients(
                self.systems.get(q),
                &self.inference_basis(q),
                quantity_of(inference, q),
            );
            combine(&c, &self.high_basis(q))
        };
        ObservablePair::new(
            self.high_snapshots[0].grid,
            part(Quantity::Rho),
            part(Quantity::Current),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let archive = PipelineArchive {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            pipeline: self.clone(),
        };
        let text = serde_json::to_string(&archive).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let archive: PipelineArchive =
            serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        if archive.format != ARCHIVE_FORMAT || archive.version != ARCHIVE_VERSION {
            return Err(Error::Serde(format!(
                "{}: unsupported archive {} v{} (expected {ARCHIVE_FORMAT} v{ARCHIVE_VERSION})",
                path.display(),
                archive.format,
                archive.version
            )));
        }
        Ok(archive.pipeline)
    }
}

pub const ARCHIVE_FORMAT: &str = "mfschrod-pipeline";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PipelineArchive {
    format: String,
    version: u32,
    pipeline: SurrogatePipeline,
}

pub fn quantity_of(o: &ObservablePair, q: Quantity) -> &[f64] {
    match q {
        Quantity::Current => &o.current,
        _ => &o.rho,
    }
}

fn gramians_for(snapshots: &[ObservablePair]) -> Result<PerQuantity<GalerkinSystem>> {
    let h = snapshots
        .first()
        .ok_or_else(|| Error::Numerical("no snapshots were selected".into()))?
        .grid
        .h();
    let sys = |q: Quantity| {
        let basis: Vec<&[f64]> = snapshots.iter().map(|o| quantity_of(o, q)).collect();
        gramian_of(&basis, h)
    };
    Ok(PerQuantity {
        rho: sys(Quantity::Rho)?,
        current: sys(Quantity::Current)?,
    })
}

/// Offline stage from precomputed low-fidelity outputs on the training set.
pub fn offline_from_low(
    low: &dyn FidelityModel,
    low_obs: &[ObservablePair],
    medium: Option<&dyn FidelityModel>,
    high: &dyn FidelityModel,
    training: &[RandomSample],
    k_max: usize,
    tol: f64,
    mut costs: CostReport,
) -> Result<SurrogatePipeline> {
    for m in medium.iter().copied().chain([high]) {
        if m.random_dim() != low.random_dim() {
            return Err(Error::InvalidInput(format!(
                "models disagree on the random dimension: {} has {}, {} has {}",
                low.name(),
                low.random_dim(),
                m.name(),
                m.random_dim()
            )));
        }
    }
    let snap = snapshots_from_observables(low_obs, training, Quantity::Stacked)?;
    let selection = greedy_select(&snap, k_max, tol)?;
    if selection.indices.is_empty() {
        return Err(Error::Numerical(
            "greedy selection found no nonzero low-fidelity snapshot".into(),
        ));
    }
    let points: Vec<RandomSample> = selection.indices.iter().map(|&i| training[i].clone()).collect();

    let inference_snapshots = match medium {
        None => selection.indices.iter().map(|&i| low_obs[i].clone()).collect(),
        Some(m) => {
            let start = Instant::now();
            let obs = evaluate_all(m, &points)?;
            costs.medium_runs += points.len();
            costs.medium_seconds += start.elapsed().as_secs_f64();
            obs
        }
    };
    let start = Instant::now();
    let high_snapshots = evaluate_all(high, &points)?;
    costs.high_runs += points.len();
    costs.high_seconds += start.elapsed().as_secs_f64();

    let systems = gramians_for(&inference_snapshots)?;
    Ok(SurrogatePipeline {
        mode: if medium.is_some() {
            FidelityMode::Trifidelity
        } else {
            FidelityMode::Bifidelity
        },
        low_model: low.name().to_string(),
        medium_model: medium.map(|m| m.name().to_string()),
        high_model: high.name().to_string(),
        training: training.to_vec(),
        selection,
        inference_snapshots,
        high_snapshots,
        systems,
        costs,
    })
}

/// Full offline stage: low-fidelity sweep, greedy selection, high-fidelity runs
/// at the selected points (and medium runs there in tri-fidelity mode).
pub fn offline_build(
    low: &dyn FidelityModel,
    medium: Option<&dyn FidelityModel>,
    high: &dyn FidelityModel,
    training: &[RandomSample],
    k_max: usize,
    tol: f64,
) -> Result<SurrogatePipeline> {
    if training.is_empty() {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    let start = Instant::now();
    let low_obs = evaluate_all(low, training)?;
    let costs = CostReport {
        low_runs: training.len(),
        low_seconds: start.elapsed().as_secs_f64(),
        ..CostReport::default()
    };
    offline_from_low(low, &low_obs, medium, high, training, k_max, tol, costs)
}

/// Online stage at one point: run the inference model and combine.
pub fn surrogate_evaluate(
    pipe: &SurrogatePipeline,
    inference: &dyn FidelityModel,
    z: &RandomSample,
) -> Result<ObservablePair> {
    if inference.name() != pipe.inference_model() {
        return Err(Error::InvalidInput(format!(
            "pipeline infers with model '{}', got '{}'",
            pipe.inference_model(),
            inference.name()
        )));
    }
    let obs = evaluate_one(inference, z).map_err(|e| Error::Model {
        model: inference.name().to_string(),
        index: 0,
        z: z.as_slice().to_vec(),
        source: Box::new(e),
    })?;
    pipe.combine_from(&obs)
}
