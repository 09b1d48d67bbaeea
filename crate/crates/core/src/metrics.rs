//! Error metrics, the empirical error bound and the stochastic collocation
//! baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ObservablePair;
use crate::multifidelity::{
    combine, gramian_of, infer_coefficients, quantity_of, weighted_norm, FidelityModel,
    GalerkinSystem, Quantity, SurrogatePipeline,
};
use crate::sampling::RandomSample;

/// `(1/N) sum_i (1/N_x) sqrt(sum_j |ref_i[j] - approx_i[j]|^2)`.
///
/// The `1/N_x` factor sits outside the square root, so this is not an RMS
/// norm; it is the average error measure used for the reported tables.
pub fn mean_l2_error<A: AsRef<[f64]>, B: AsRef<[f64]>>(refs: &[A], approx: &[B]) -> Result<f64> {
    if refs.len() != approx.len() || refs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "error sets must be nonempty and equal in size, got {} and {}",
            refs.len(),
            approx.len()
        )));
    }
    let mut total = 0.0;
    for (i, (r, a)) in refs.iter().zip(approx).enumerate() {
        let (r, a) = (r.as_ref(), a.as_ref());
        if r.len() != a.len() || r.is_empty() {
            return Err(Error::InvalidInput(format!(
                "sample {i}: vectors have lengths {} and {}",
                r.len(),
                a.len()
            )));
        }
        let ss: f64 = r.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
        total += ss.sqrt() / r.len() as f64;
    }
    Ok(total / refs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err_rho: f64,
    pub err_current: f64,
    pub per_sample: Option<Vec<(f64, f64)>>,
    pub k_used: usize,
}

/// Both error measures over a test set; `per_sample` holds the summand of
/// each `z` (before averaging).
pub fn error_report(
    refs: &[ObservablePair],
    approx: &[ObservablePair],
    k_used: usize,
) -> Result<ErrorReport> {
    let pick = |s: &[ObservablePair], q: Quantity| -> Vec<Vec<f64>> {
        s.iter().map(|o| quantity_of(o, q).to_vec()).collect()
    };
    let err_rho = mean_l2_error(&pick(refs, Quantity::Rho), &pick(approx, Quantity::Rho))?;
    let err_current = mean_l2_error(
        &pick(refs, Quantity::Current),
        &pick(approx, Quantity::Current),
    )?;
    let per_sample = refs
        .iter()
        .zip(approx)
        .map(|(r, a)| {
            Ok((
                mean_l2_error(&[&r.rho], &[&a.rho])?,
                mean_l2_error(&[&r.current], &[&a.current])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport {
        err_rho,
        err_current,
        per_sample: Some(per_sample),
        k_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_rho: f64,
    pub bound_current: f64,
    /// Fraction of test points where both bounds dominate the true relative errors.
    pub coverage: f64,
}

fn projection_residual(sys: &GalerkinSystem, basis: &[&[f64]], u: &[f64]) -> Vec<f64> {
    let c = infer_coefficients(sys, basis, u);
    let p = combine(&c, basis);
    u.iter().zip(&p).map(|(a, b)| a - b).collect()
}

/// Bound ingredients for one prefix length `k`, shared by every test point.
pub struct BoundContext {
    k: usize,
    prefix: SurrogatePipeline,
    /// `c1 + c2 R_e(z_{k+1})` per quantity.
    factor: [f64; 2],
}

impl BoundContext {
    /// Requires at least `k + 1` selected points so that `z_{k+1}` has a
    /// high-fidelity snapshot.
    pub fn new(pipe: &SurrogatePipeline, k: usize, c1: f64, c2: f64) -> Result<Self> {
        if k == 0 || k + 1 > pipe.k() {
            return Err(Error::InvalidInput(format!(
                "bound at k = {k} needs at least k + 1 selected points, pipeline has {}",
                pipe.k()
            )));
        }
        let prefix = pipe.truncated(k)?;
        let next_inference = &pipe.inference_snapshots[k];
        let next_high = &pipe.high_snapshots[k];
        let surrogate = prefix.combine_from(next_inference)?;
        let h = next_high.grid.h();
        let mut factor = [0.0; 2];
        for (slot, q) in [Quantity::Rho, Quantity::Current].into_iter().enumerate() {
            let basis = prefix.high_basis(q);
            let sys = gramian_of(&basis, h)?;
            let u = quantity_of(next_high, q);
            let resid = projection_residual(&sys, &basis, u);
            let d = weighted_norm(&resid, h);
            if d < 1e-14 {
                return Err(Error::Numerical(format!(
                    "high-fidelity distance of z_(k+1) to the first {k} snapshots is {d:e}"
                )));
            }
            let projected: Vec<f64> = u.iter().zip(&resid).map(|(a, r)| a - r).collect();
            let gap: Vec<f64> = projected
                .iter()
                .zip(quantity_of(&surrogate, q))
                .map(|(a, b)| a - b)
                .collect();
            factor[slot] = c1 + c2 * weighted_norm(&gap, h) / d;
        }
        Ok(Self { k, prefix, factor })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn prefix(&self) -> &SurrogatePipeline {
        &self.prefix
    }

    /// `(rho, J)` bounds `d^Y(u^Y(z*)) / ||u^Y(z*)|| (c1 + c2 R_e(z_{k+1}))`
    /// from the inference model's output at `z*`.
    pub fn bound(&self, inference: &ObservablePair) -> (f64, f64) {
        let h = inference.grid.h();
        let mut out = [0.0; 2];
        for (slot, q) in [Quantity::Rho, Quantity::Current].into_iter().enumerate() {
            let u = quantity_of(inference, q);
            let norm = weighted_norm(u, h);
            if norm == 0.0 {
                continue;
            }
            let basis = self.prefix.inference_basis(q);
            let resid = projection_residual(self.prefix.systems.get(q), &basis, u);
            out[slot] = weighted_norm(&resid, h) / norm * self.factor[slot];
        }
        (out[0], out[1])
    }
}

/// Empirical bound at one point.
pub fn empirical_bound(
    pipe: &SurrogatePipeline,
    k: usize,
    inference_at_z: &ObservablePair,
    c1: f64,
    c2: f64,
) -> Result<(f64, f64)> {
    Ok(BoundContext::new(pipe, k, c1, c2)?.bound(inference_at_z))
}

/// Relative `L2` error `||u^H - u^F|| / ||u^H||` per quantity.
pub fn relative_errors(high: &ObservablePair, surrogate: &ObservablePair) -> (f64, f64) {
    let h = high.grid.h();
    let rel = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let n = weighted_norm(a, h);
        if n > 0.0 {
            weighted_norm(&d, h) / n
        } else {
            weighted_norm(&d, h)
        }
    };
    (
        rel(&high.rho, &surrogate.rho),
        rel(&high.current, &surrogate.current),
    )
}

/// Mean bounds over a test set, and how often they hold.
pub fn bound_report(
    ctx: &BoundContext,
    inference: &[ObservablePair],
    high: &[ObservablePair],
) -> Result<BoundReport> {
    if inference.len() != high.len() || inference.is_empty() {
        return Err(Error::InvalidInput(
            "bound report needs matching, nonempty test sets".into(),
        ));
    }
    let mut sum = (0.0, 0.0);
    let mut covered = 0usize;
    for (inf, hi) in inference.iter().zip(high) {
        let b = ctx.bound(inf);
        let s = ctx.prefix().combine_from(inf)?;
        let e = relative_errors(hi, &s);
        sum.0 += b.0;
        sum.1 += b.1;
        if b.0 >= e.0 && b.1 >= e.1 {
            covered += 1;
        }
    }
    let n = inference.len() as f64;
    Ok(BoundReport {
        bound_rho: sum.0 / n,
        bound_current: sum.1 / n,
        coverage: covered as f64 / n,
    })
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`, weights
/// normalized to sum to one.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one quadrature node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes, weights))
}

fn require_scalar_parameter(model: &dyn FidelityModel) -> Result<()> {
    if model.random_dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "stochastic collocation needs a one-dimensional random input, model {} has {}",
            model.name(),
            model.random_dim()
        )));
    }
    Ok(())
}

/// Weighted average of observables.
fn weighted_mean(obs: &[ObservablePair], weights: &[f64]) -> ObservablePair {
    let mut mean = ObservablePair::zeros(obs[0].grid);
    for (o, w) in obs.iter().zip(weights) {
        mean.rho.iter_mut().zip(&o.rho).for_each(|(m, v)| *m += w * v);
        mean.current.iter_mut().zip(&o.current).for_each(|(m, v)| *m += w * v);
    }
    mean
}

/// `E[U]` by `n_c`-point Gauss–Legendre collocation for `z ~ U(-1, 1)`.
pub fn sc_mean_estimate(model: &dyn FidelityModel, n_c: usize) -> Result<ObservablePair> {
    require_scalar_parameter(model)?;
    let (nodes, weights) = gauss_legendre(n_c)?;
    let samples: Vec<RandomSample> = nodes
        .iter()
        .map(|&z| RandomSample::new(vec![z]))
        .collect::<Result<_>>()?;
    let obs = crate::multifidelity::evaluate_all(model, &samples)?;
    Ok(weighted_mean(&obs, &weights))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScTable {
    pub n_ref: usize,
    pub n_c: Vec<usize>,
    pub err_rho: Vec<f64>,
    pub err_current: Vec<f64>,
}

/// Unweighted Euclidean distance of each `n_c` mean to the `n_ref` mean.
pub fn sc_error_table(model: &dyn FidelityModel, n_c_list: &[usize], n_ref: usize) -> Result<ScTable> {
    require_scalar_parameter(model)?;
    if let Some(&m) = n_c_list.iter().max() {
        if m > n_ref {
            return Err(Error::InvalidInput(format!(
                "reference size {n_ref} is smaller than the largest collocation size {m}"
            )));
        }
    }
    let reference = sc_mean_estimate(model, n_ref)?;
    let l2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut table = ScTable {
        n_ref,
        n_c: n_c_list.to_vec(),
        err_rho: Vec::new(),
        err_current: Vec::new(),
    };
    for &n_c in n_c_list {
        let est = sc_mean_estimate(model, n_c)?;
        table.err_rho.push(l2(&est.rho, &reference.rho));
        table.err_current.push(l2(&est.current, &reference.current));
    }
    Ok(table)
}

/// Number of Gauss points in `z` used by [`rho_z_diagnostic`].
pub const RHO_Z_NODES: usize = 20;

/// `||d rho / dz||` in `L2(x) x L2(z)` for each `eps`, by centred differences
/// with step `dz` at Gauss points.
pub fn rho_z_diagnostic(
    model_for: &(dyn Fn(f64) -> Result<Box<dyn FidelityModel>> + Sync),
    eps_list: &[f64],
    dz: f64,
) -> Result<Vec<f64>> {
    if !(dz > 0.0) {
        return Err(Error::InvalidInput(format!("dz must be positive, got {dz}")));
    }
    let (nodes, weights) = gauss_legendre(RHO_Z_NODES)?;
    eps_list
        .iter()
        .map(|&eps| {
            let model = model_for(eps)?;
            require_scalar_parameter(model.as_ref())?;
            let terms: Vec<Result<f64>> = nodes
                .par_iter()
                .zip(&weights)
                .map(|(&z, &w)| {
                    let plus = model.evaluate(&RandomSample::new(vec![(z + dz).min(1.0)])?)?;
                    let minus = model.evaluate(&RandomSample::new(vec![(z - dz).max(-1.0)])?)?;
                    let span = (z + dz).min(1.0) - (z - dz).max(-1.0);
                    let d: Vec<f64> = plus
                        .rho
                        .iter()
                        .zip(&minus.rho)
                        .map(|(a, b)| (a - b) / span)
                        .collect();
                    let n = weighted_norm(&d, plus.grid.h());
                    Ok(w * n * n)
                })
                .collect();
            let mut total = 0.0;
            for t in terms {
                total += t?;
            }
            Ok(total.sqrt())
        })
        .collect()
}
