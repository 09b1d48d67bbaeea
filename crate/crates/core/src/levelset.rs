//! Level-set solver for the semiclassical Liouville equation.
//!
//! Both the density carrier `f` and the level-set function `phi` solve
//!
//! ```text
//! u_t + p u_x - V'(x) u_p = 0
//! ```
//!
//! on a periodic-in-`x`, Neumann-in-`p` phase-space grid. Spatial derivatives
//! use upwinded fifth-order WENO (Jiang–Peng) and time stepping uses the
//! three-stage TVD Runge–Kutta scheme. Moments are read off with a smoothed
//! delta function: `rho = int f delta(phi) dp`, `J = int p f delta(phi) dp`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WkbData;
use crate::grid::{ObservablePair, SpatialGrid1D};
use crate::sampling::RandomSample;
use crate::tsfp::step_count;

/// Regularizer in the WENO smoothness weights.
pub const WENO_EPSILON: f64 = 1e-6;

const GHOST: usize = 3;

/// Tensor grid of `xgrid` with `p_k = p_min + k dp`, `k = 0..np`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub xgrid: SpatialGrid1D,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl PhaseGrid {
    pub fn new(xgrid: SpatialGrid1D, p_min: f64, p_max: f64, np: usize) -> Result<Self> {
        if !(p_max > p_min) || !p_min.is_finite() || !p_max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "momentum range [{p_min}, {p_max}] is empty"
            )));
        }
        if np < 4 {
            return Err(Error::InvalidInput(format!(
                "need at least 4 momentum cells, got {np}"
            )));
        }
        Ok(Self {
            xgrid,
            p_min,
            p_max,
            np,
        })
    }

    /// Grid with momentum spacing `dp` (rounded to the nearest whole cell count).
    pub fn with_dp(xgrid: SpatialGrid1D, p_min: f64, p_max: f64, dp: f64) -> Result<Self> {
        if !(dp > 0.0) {
            return Err(Error::InvalidInput(format!("dp must be positive, got {dp}")));
        }
        Self::new(xgrid, p_min, p_max, ((p_max - p_min) / dp).round() as usize)
    }

    pub fn nx(&self) -> usize {
        self.xgrid.n()
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn p(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.dp()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.np).map(|k| self.p(k)).collect()
    }
}

/// `f` and `phi` stored row-major as `[j * np + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub grid: PhaseGrid,
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub t: f64,
}

impl LevelSetState {
    pub fn new(grid: PhaseGrid, f: Vec<f64>, phi: Vec<f64>, t: f64) -> Result<Self> {
        let size = grid.nx() * grid.np;
        if f.len() != size || phi.len() != size {
            return Err(Error::InvalidInput(format!(
                "level-set arrays have lengths ({}, {}), grid needs {size}",
                f.len(),
                phi.len()
            )));
        }
        if f.iter().chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("level-set state has non-finite entries".into()));
        }
        Ok(Self { grid, f, phi, t })
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.grid.np + k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKernelKind {
    PiecewiseLinear,
    Cosine,
}

/// Smoothed delta function of half-width `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaKernelSpec {
    pub kind: DeltaKernelKind,
    pub eta: f64,
}

impl DeltaKernelSpec {
    /// Kernel with `eta = kappa * dp`.
    pub fn on_grid(kind: DeltaKernelKind, kappa: usize, dp: f64) -> Result<Self> {
        if kappa == 0 || !(dp > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel width needs kappa >= 1 and dp > 0, got {kappa}, {dp}"
            )));
        }
        Ok(Self {
            kind,
            eta: kappa as f64 * dp,
        })
    }
}

pub fn delta_kernel(spec: &DeltaKernelSpec, s: f64) -> f64 {
    let eta = spec.eta;
    if s.abs() > eta {
        return 0.0;
    }
    match spec.kind {
        DeltaKernelKind::PiecewiseLinear => (1.0 - s.abs() / eta) / eta,
        DeltaKernelKind::Cosine => (1.0 + (std::f64::consts::PI * s / eta).cos()) / (2.0 * eta),
    }
}

/// `f = n0`, `phi = p - dS0/dx`.
pub fn ls_init(data: &WkbData, z: &RandomSample, grid: &PhaseGrid) -> Result<LevelSetState> {
    let xs = grid.xgrid.nodes();
    let ds0 = data.phase_gradient(&grid.xgrid, z);
    let momenta = grid.momenta();
    let mut f = Vec::with_capacity(xs.len() * grid.np);
    let mut phi = Vec::with_capacity(xs.len() * grid.np);
    for (j, &x) in xs.iter().enumerate() {
        let n0 = (data.n0)(x, z);
        for &p in &momenta {
            f.push(n0);
            phi.push(p - ds0[j]);
        }
    }
    LevelSetState::new(*grid, f, phi, 0.0)
}

/// Largest stable step `safety * min(dx, dp) / (2 max(|p|, |V'|))`.
pub fn cfl_timestep(grid: &PhaseGrid, v1: &dyn Fn(f64) -> f64, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "CFL safety factor must lie in (0, 1], got {safety}"
        )));
    }
    let max_p = grid.p_min.abs().max(grid.p(grid.np - 1).abs());
    let max_force = grid
        .xgrid
        .nodes()
        .iter()
        .map(|&x| v1(x).abs())
        .fold(0.0, f64::max);
    let h = grid.xgrid.h().min(grid.dp());
    let speed = max_p.max(max_force);
    Ok(if speed > 0.0 {
        safety * h / (2.0 * speed)
    } else {
        safety * h
    })
}

/// Fifth-order WENO approximation of a one-sided derivative from the five
/// consecutive differences `v1..v5` (ordered in the upwind direction).
pub fn weno5_derivative(v: [f64; 5]) -> f64 {
    let [v1, v2, v3, v4, v5] = v;
    let d0 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0;
    let d1 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0;
    let d2 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0;
    let s0 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3).powi(2) + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3).powi(2);
    let s1 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4).powi(2) + 0.25 * (v2 - v4).powi(2);
    let s2 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5).powi(2) + 0.25 * (3.0 * v3 - 4.0 * v4 + v5).powi(2);
    let a0 = 0.1 / (WENO_EPSILON + s0).powi(2);
    let a1 = 0.6 / (WENO_EPSILON + s1).powi(2);
    let a2 = 0.3 / (WENO_EPSILON + s2).powi(2);
    (a0 * d0 + a1 * d1 + a2 * d2) / (a0 + a1 + a2)
}

/// Upwind derivative at the centre of a 7-point stencil `u[0..7]` (centre
/// `u[3]`), left-biased when `from_left`.
fn upwind(u: &[f64; 7], h: f64, from_left: bool) -> f64 {
    let d = |i: usize| (u[i + 1] - u[i]) / h;
    if from_left {
        weno5_derivative([d(0), d(1), d(2), d(3), d(4)])
    } else {
        weno5_derivative([d(5), d(4), d(3), d(2), d(1)])
    }
}

struct Advection<'a> {
    grid: &'a PhaseGrid,
    momenta: Vec<f64>,
    force: Vec<f64>,
}

impl Advection<'_> {
    /// `-(p u_x - V' u_p)` with upwinding by the sign of each velocity.
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let nx = self.grid.nx();
        let np = self.grid.np;
        let (dx, dp) = (self.grid.xgrid.h(), self.grid.dp());
        out.par_chunks_mut(np).enumerate().for_each(|(j, row)| {
            let vp = self.force[j];
            for (k, r) in row.iter_mut().enumerate() {
                let p = self.momenta[k];
                let mut sx = [0.0; 7];
                let mut sp = [0.0; 7];
                for m in 0..7 {
                    let jj = (j + nx + m - GHOST) % nx;
                    sx[m] = u[jj * np + k];
                    let kk = (k + m).saturating_sub(GHOST).min(np - 1);
                    sp[m] = u[j * np + kk];
                }
                let ux = if p == 0.0 { 0.0 } else { upwind(&sx, dx, p > 0.0) };
                // Momentum velocity is -V'(x).
                let up = if vp == 0.0 { 0.0 } else { upwind(&sp, dp, vp < 0.0) };
                *r = -(p * ux - vp * up);
            }
        });
    }
}

fn rk3_stage(u0: &[f64], u: &mut [f64], lu: &[f64], dt: f64, a: f64) {
    for ((y, &y0), &l) in u.iter_mut().zip(u0).zip(lu) {
        *y = a * y0 + (1.0 - a) * (*y + dt * l);
    }
}

fn rk3_step(adv: &Advection<'_>, u: &mut [f64], dt: f64, work: &mut [f64]) {
    let u0 = u.to_vec();
    adv.rhs(u, work);
    rk3_stage(&u0, u, work, dt, 0.0);
    adv.rhs(u, work);
    rk3_stage(&u0, u, work, dt, 0.75);
    adv.rhs(u, work);
    rk3_stage(&u0, u, work, dt, 1.0 / 3.0);
}

/// Advance `f` and `phi` to `state.t + t_final` with step `dt`.
pub fn ls_solve(
    state: &LevelSetState,
    v1: &dyn Fn(f64) -> f64,
    dt: f64,
    t_final: f64,
) -> Result<LevelSetState> {
    let grid = &state.grid;
    let limit = cfl_timestep(grid, v1, 1.0)?;
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "time step {dt} violates the CFL limit {limit}"
        )));
    }
    let steps = step_count(dt, t_final)?;
    let adv = Advection {
        grid,
        momenta: grid.momenta(),
        force: grid.xgrid.nodes().iter().map(|&x| v1(x)).collect(),
    };
    if adv.force.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("potential gradient is not finite on the grid".into()));
    }
    let mut f = state.f.clone();
    let mut phi = state.phi.clone();
    let mut work = vec![0.0; f.len()];
    for _ in 0..steps {
        rk3_step(&adv, &mut f, dt, &mut work);
        rk3_step(&adv, &mut phi, dt, &mut work);
    }
    if f.iter().chain(&phi).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("level-set solution blew up".into()));
    }
    Ok(LevelSetState {
        grid: *grid,
        f,
        phi,
        t: state.t + t_final,
    })
}

/// `rho_j = sum_k f delta(phi) dp` and `J_j = sum_k p_k f delta(phi) dp`.
pub fn ls_observables(state: &LevelSetState, spec: &DeltaKernelSpec) -> Result<ObservablePair> {
    let grid = &state.grid;
    let dp = grid.dp();
    let ratio = spec.eta / dp;
    if !(ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(Error::InvalidInput(format!(
            "kernel half-width {} is not a positive multiple of dp = {dp}",
            spec.eta
        )));
    }
    let momenta = grid.momenta();
    let np = grid.np;
    let mut rho = Vec::with_capacity(grid.nx());
    let mut current = Vec::with_capacity(grid.nx());
    for j in 0..grid.nx() {
        let (mut r, mut c) = (0.0, 0.0);
        for (k, &p) in momenta.iter().enumerate() {
            let w = state.f[j * np + k] * delta_kernel(spec, state.phi[j * np + k]) * dp;
            r += w;
            c += p * w;
        }
        rho.push(r);
        current.push(c);
    }
    ObservablePair::new(grid.xgrid, rho, current)
}
