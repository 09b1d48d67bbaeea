//! Frozen Gaussian approximation (FGA).
//!
//! The initial wavefunction is written as a superposition of phase-space
//! Gaussians ("particles"), each particle follows the Hamiltonian flow of
//! `H = p^2/2 + V(q)` and carries an action `S` and a complex amplitude `A`,
//! and the wavefunction at later times is summed back from the particles.
//!
//! With `d/dz = d/dq0 - i d/dp0` and the flow Jacobian
//! `jac = d(Q, P) / d(q0, p0)`, the amplitude obeys
//!
//! ```text
//! dA/dt = A (dP/dz - i V''(Q) dQ/dz) / (2 Z),    Z = dQ/dz + i dP/dz.
//! ```

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{check_eps, WaveField};
use crate::grid::SpatialGrid1D;
use crate::tsfp::step_count;

/// Initial amplitude factor `a(0, q, p) = 2^{1/2}` of the one-dimensional
/// single-surface FGA.
pub const INITIAL_AMPLITUDE_FACTOR: f64 = std::f64::consts::SQRT_2;

/// Gaussians further than this many `sqrt(eps)` from a point are dropped
/// from sums; `exp(-50)` is below `1e-21`.
pub const TRUNCATION_RADIUS: f64 = 10.0;

/// Smallest admissible `|Z|` during evolution.
pub const SINGULAR_Z_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FGAParticle {
    pub q: f64,
    pub p: f64,
    pub s: f64,
    pub amp: Complex64,
    /// `[[dQ/dq0, dQ/dp0], [dP/dq0, dP/dp0]]`.
    pub jac: [[f64; 2]; 2],
}

impl FGAParticle {
    pub fn new(q: f64, p: f64, amp: Complex64) -> Self {
        Self {
            q,
            p,
            s: 0.0,
            amp,
            jac: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn det_jac(&self) -> f64 {
        self.jac[0][0] * self.jac[1][1] - self.jac[0][1] * self.jac[1][0]
    }

    /// `Z = dQ/dz + i dP/dz`.
    pub fn z_factor(&self) -> Complex64 {
        z_of(&self.jac)
    }
}

fn z_of(j: &[[f64; 2]; 2]) -> Complex64 {
    Complex64::new(j[0][0] + j[1][1], j[1][0] - j[0][1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FGAEnsemble {
    pub particles: Vec<FGAParticle>,
    /// Phase-space cell volume `dq * dp` carried by each particle.
    pub weight: f64,
    pub eps: f64,
    pub t: f64,
}

impl FGAEnsemble {
    pub fn new(particles: Vec<FGAParticle>, weight: f64, eps: f64, t: f64) -> Result<Self> {
        check_eps(eps)?;
        if particles.is_empty() {
            return Err(Error::InvalidInput("FGA ensemble has no particles".into()));
        }
        if !(weight > 0.0) {
            return Err(Error::InvalidInput(format!(
                "particle weight must be positive, got {weight}"
            )));
        }
        Ok(Self {
            particles,
            weight,
            eps,
            t,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Rectangle `[q_min, q_max] x [p_min, p_max]` in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl PhaseBox {
    pub fn new(q_min: f64, q_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        if !(q_max > q_min && p_max > p_min) {
            return Err(Error::InvalidInput(format!(
                "phase-space box [{q_min}, {q_max}] x [{p_min}, {p_max}] is empty"
            )));
        }
        Ok(Self {
            q_min,
            q_max,
            p_min,
            p_max,
        })
    }
}

/// Amplitude `A(0, q, p)` of the Gaussian centred at `(q, p)`, by the
/// trapezoidal rule on the field's grid.
pub fn initial_amplitude(field: &WaveField, q: f64, p: f64) -> Complex64 {
    let eps = field.eps;
    let grid = &field.grid;
    let h = grid.h();
    let r = TRUNCATION_RADIUS * eps.sqrt();
    let n = grid.n() as f64;
    let lo = ((q - r - grid.a()) / h).ceil().clamp(0.0, n) as usize;
    let hi = (((q + r - grid.a()) / h).floor() + 1.0).clamp(0.0, n) as usize;
    let mut acc = Complex64::default();
    for j in lo..hi.max(lo) {
        let d = grid.x(j) - q;
        let kernel = Complex64::from_polar((-d * d / (2.0 * eps)).exp(), -p * d / eps);
        acc += field.values[j] * kernel;
    }
    acc * (INITIAL_AMPLITUDE_FACTOR * h)
}

/// Place particles on an `nq x np` mesh (endpoints included) and keep those
/// with `|A| >= keep_threshold * max |A|`.
pub fn fga_decompose(
    field: &WaveField,
    bounds: PhaseBox,
    nq: usize,
    np: usize,
    keep_threshold: f64,
) -> Result<FGAEnsemble> {
    if nq < 2 || np < 2 {
        return Err(Error::InvalidInput(format!(
            "particle mesh needs at least 2 x 2 points, got {nq} x {np}"
        )));
    }
    if !(0.0..1.0).contains(&keep_threshold) {
        return Err(Error::InvalidInput(format!(
            "keep threshold must lie in [0, 1), got {keep_threshold}"
        )));
    }
    let dq = (bounds.q_max - bounds.q_min) / (nq - 1) as f64;
    let dp = (bounds.p_max - bounds.p_min) / (np - 1) as f64;
    let candidates: Vec<FGAParticle> = (0..nq * np)
        .into_par_iter()
        .map(|idx| {
            let q = bounds.q_min + (idx / np) as f64 * dq;
            let p = bounds.p_min + (idx % np) as f64 * dp;
            FGAParticle::new(q, p, initial_amplitude(field, q, p))
        })
        .collect();
    let max_amp = candidates.iter().map(|c| c.amp.norm()).fold(0.0, f64::max);
    if !(max_amp > 0.0) {
        return Err(Error::Numerical(
            "FGA decomposition produced no particles: every amplitude vanishes".into(),
        ));
    }
    let cut = keep_threshold * max_amp;
    let particles: Vec<FGAParticle> = candidates
        .into_iter()
        .filter(|c| c.amp.norm() >= cut)
        .collect();
    FGAEnsemble::new(particles, dq * dp, field.eps, field.t)
}

/// `V`, `V'` and `V''` as functions of position only.
#[derive(Clone, Copy)]
pub struct PotentialSlice<'a> {
    pub v0: &'a (dyn Fn(f64) -> f64 + Sync),
    pub v1: &'a (dyn Fn(f64) -> f64 + Sync),
    pub v2: &'a (dyn Fn(f64) -> f64 + Sync),
}

#[derive(Clone, Copy)]
struct Phase {
    q: f64,
    p: f64,
    s: f64,
    jac: [[f64; 2]; 2],
    amp: Complex64,
}

impl Phase {
    fn axpy(&self, h: f64, k: &Phase) -> Phase {
        let mut jac = self.jac;
        for (r, kr) in jac.iter_mut().zip(&k.jac) {
            for (c, kc) in r.iter_mut().zip(kr) {
                *c += h * kc;
            }
        }
        Phase {
            q: self.q + h * k.q,
            p: self.p + h * k.p,
            s: self.s + h * k.s,
            jac,
            amp: self.amp + k.amp * h,
        }
    }
}

fn rhs(y: &Phase, pot: &PotentialSlice<'_>) -> std::result::Result<Phase, f64> {
    let v2 = (pot.v2)(y.q);
    let j = &y.jac;
    let z = z_of(j);
    if z.norm() < SINGULAR_Z_TOLERANCE {
        return Err(z.norm());
    }
    let dzq = Complex64::new(j[0][0], -j[0][1]);
    let dzp = Complex64::new(j[1][0], -j[1][1]);
    let i = Complex64::i();
    Ok(Phase {
        q: y.p,
        p: -(pot.v1)(y.q),
        s: 0.5 * y.p * y.p - (pot.v0)(y.q),
        jac: [[j[1][0], j[1][1]], [-v2 * j[0][0], -v2 * j[0][1]]],
        amp: y.amp * (dzp - i * dzq * v2) / (2.0 * z),
    })
}

fn rk4_particle(
    part: &FGAParticle,
    pot: &PotentialSlice<'_>,
    tau: f64,
    steps: usize,
) -> std::result::Result<FGAParticle, f64> {
    let mut y = Phase {
        q: part.q,
        p: part.p,
        s: part.s,
        jac: part.jac,
        amp: part.amp,
    };
    for _ in 0..steps {
        let k1 = rhs(&y, pot)?;
        let k2 = rhs(&y.axpy(tau / 2.0, &k1), pot)?;
        let k3 = rhs(&y.axpy(tau / 2.0, &k2), pot)?;
        let k4 = rhs(&y.axpy(tau, &k3), pot)?;
        y = y
            .axpy(tau / 6.0, &k1)
            .axpy(tau / 3.0, &k2)
            .axpy(tau / 3.0, &k3)
            .axpy(tau / 6.0, &k4);
    }
    Ok(FGAParticle {
        q: y.q,
        p: y.p,
        s: y.s,
        amp: y.amp,
        jac: y.jac,
    })
}

/// Advance every particle to `ens.t + t_final` with classical RK4.
pub fn fga_evolve(
    ens: &FGAEnsemble,
    pot: PotentialSlice<'_>,
    tau: f64,
    t_final: f64,
) -> Result<FGAEnsemble> {
    let steps = step_count(tau, t_final)?;
    if steps == 0 {
        return Ok(ens.clone());
    }
    let evolved: Vec<std::result::Result<FGAParticle, f64>> = ens
        .particles
        .par_iter()
        .map(|part| rk4_particle(part, &pot, tau, steps))
        .collect();
    let mut particles = Vec::with_capacity(evolved.len());
    for (k, r) in evolved.into_iter().enumerate() {
        match r {
            Ok(p) if p.amp.re.is_finite() && p.amp.im.is_finite() && p.q.is_finite() => {
                particles.push(p)
            }
            Ok(_) => {
                return Err(Error::Numerical(format!(
                    "FGA particle {k} left the finite range during evolution"
                )))
            }
            Err(zn) => {
                return Err(Error::Numerical(format!(
                    "FGA particle {k}: Z became singular (|Z| = {zn:e})"
                )))
            }
        }
    }
    FGAEnsemble::new(particles, ens.weight, ens.eps, ens.t + t_final)
}

/// Sum the Gaussians back onto `grid`.
///
/// Each output node adds the particles within `TRUNCATION_RADIUS * sqrt(eps)`
/// in order of increasing `Q` (ties by index), so the result does not depend
/// on the thread count.
pub fn fga_reconstruct(ens: &FGAEnsemble, grid: &SpatialGrid1D) -> Result<WaveField> {
    let eps = ens.eps;
    let mut order: Vec<usize> = (0..ens.particles.len()).collect();
    order.sort_by(|&a, &b| {
        ens.particles[a]
            .q
            .total_cmp(&ens.particles[b].q)
            .then(a.cmp(&b))
    });
    let sorted: Vec<&FGAParticle> = order.iter().map(|&k| &ens.particles[k]).collect();
    let qs: Vec<f64> = sorted.iter().map(|p| p.q).collect();
    let r = TRUNCATION_RADIUS * eps.sqrt();
    let scale = ens.weight * (2.0 * PI * eps).powf(-1.5);
    let values: Vec<Complex64> = grid
        .nodes()
        .par_iter()
        .map(|&x| {
            let lo = qs.partition_point(|&q| q < x - r);
            let hi = qs.partition_point(|&q| q <= x + r);
            let mut acc = Complex64::default();
            for part in &sorted[lo..hi] {
                let d = x - part.q;
                let phase = (part.s + part.p * d) / eps;
                acc += part.amp * Complex64::from_polar((-d * d / (2.0 * eps)).exp(), phase);
            }
            acc * scale
        })
        .collect();
    WaveField::new(*grid, eps, ens.t, values)
}
