//! Time-splitting Fourier pseudospectral (TSFP) solver.
//!
//! One step of size `tau` is the Strang composition
//!
//! ```text
//! K(tau/2) . P(tau) . K(tau/2)
//! ```
//!
//! where `K(s)` multiplies Fourier mode `l` by `exp(-i eps s mu_l^2 / 2)` and
//! `P(tau)` multiplies node `j` by `exp(-i tau V(x_j, z) / eps)`. Both factors
//! are unitary, so the discrete L2 norm is conserved up to roundoff.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::sampling::RandomSample;
use crate::spectral::SpectralWorkspace;

/// Time step and final time; `t_final / tau` must be an integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsfpConfig {
    pub tau: f64,
    pub t_final: f64,
}

/// Relative tolerance on `t_final / tau` being integral.
pub const STEP_COUNT_TOLERANCE: f64 = 1e-9;

impl TsfpConfig {
    pub fn new(tau: f64, t_final: f64) -> Result<Self> {
        let cfg = Self { tau, t_final };
        cfg.steps()?;
        Ok(cfg)
    }

    /// Largest step not exceeding `max_tau` that divides `t_final` exactly.
    pub fn with_max_step(max_tau: f64, t_final: f64) -> Result<Self> {
        if !(max_tau > 0.0) || !(t_final >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "need max_tau > 0 and t_final >= 0, got {max_tau}, {t_final}"
            )));
        }
        if t_final == 0.0 {
            return Self::new(max_tau, 0.0);
        }
        let steps = (t_final / max_tau).ceil();
        Self::new(t_final / steps, t_final)
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.tau, self.t_final)
    }
}

/// `t_final / tau` rounded to the nearest integer, rejecting mismatches.
pub fn step_count(tau: f64, t_final: f64) -> Result<usize> {
    if !(tau > 0.0) || !(t_final >= 0.0) || !tau.is_finite() || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need tau > 0 and t_final >= 0, got tau = {tau}, t_final = {t_final}"
        )));
    }
    let ratio = t_final / tau;
    let steps = ratio.round();
    if (ratio - steps).abs() > STEP_COUNT_TOLERANCE * ratio.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "t_final = {t_final} is not an integer multiple of tau = {tau} (ratio {ratio})"
        )));
    }
    Ok(steps as usize)
}

/// Cached propagator for one `(grid, eps, z)` triple.
///
/// The potential phase `exp(-i tau V / eps)` and the kinetic multipliers are
/// computed once and reused for the whole time loop.
pub struct TsfpPropagator {
    ws: SpectralWorkspace,
    eps: f64,
    tau: f64,
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
    potential_phase: Vec<Complex64>,
}

impl TsfpPropagator {
    pub fn new(
        field: &WaveField,
        v: &dyn Fn(f64, &RandomSample) -> f64,
        z: &RandomSample,
        tau: f64,
    ) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::InvalidInput(format!("time step must be finite, got {tau}")));
        }
        let ws = SpectralWorkspace::new(field.grid);
        let eps = field.eps;
        let kinetic = |s: f64| -> Vec<Complex64> {
            ws.wavenumbers()
                .iter()
                .map(|mu| Complex64::from_polar(1.0, -eps * s * mu * mu / 2.0))
                .collect()
        };
        let half_kinetic = kinetic(tau / 2.0);
        let full_kinetic = kinetic(tau);
        let mut potential_phase = Vec::with_capacity(field.grid.n());
        for (j, x) in field.grid.nodes().into_iter().enumerate() {
            let vx = v(x, z);
            if !vx.is_finite() {
                return Err(Error::Domain(format!(
                    "potential is not finite at node {j} (x = {x}): {vx}"
                )));
            }
            potential_phase.push(Complex64::from_polar(1.0, -tau * vx / eps));
        }
        Ok(Self {
            ws,
            eps,
            tau,
            half_kinetic,
            full_kinetic,
            potential_phase,
        })
    }

    /// Advance `values` by `steps` Strang steps in place.
    ///
    /// Adjacent half kinetic factors are merged into one full factor; the
    /// result equals `steps` separate applications of [`tsfp_step`].
    pub fn advance(&mut self, values: &mut [Complex64], steps: usize) {
        if steps == 0 {
            return;
        }
        self.ws.forward(values);
        mul_assign(values, &self.half_kinetic);
        for s in 0..steps {
            self.ws.inverse(values);
            mul_assign(values, &self.potential_phase);
            self.ws.forward(values);
            if s + 1 == steps {
                mul_assign(values, &self.half_kinetic);
            } else {
                mul_assign(values, &self.full_kinetic);
            }
        }
        self.ws.inverse(values);
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

fn mul_assign(values: &mut [Complex64], factors: &[Complex64]) {
    for (v, f) in values.iter_mut().zip(factors) {
        *v *= f;
    }
}

/// One Strang step of size `tau` (any finite `tau`; `0` is the identity and a
/// negative value steps backward in time).
pub fn tsfp_step(
    field: &WaveField,
    v: &dyn Fn(f64, &RandomSample) -> f64,
    z: &RandomSample,
    tau: f64,
) -> Result<WaveField> {
    let mut prop = TsfpPropagator::new(field, v, z, tau)?;
    let mut out = field.clone();
    prop.advance(&mut out.values, 1);
    out.t += tau;
    Ok(out)
}

/// Advance `field` to `cfg.t_final` in `t_final / tau` steps.
pub fn tsfp_solve(
    field: &WaveField,
    v: &dyn Fn(f64, &RandomSample) -> f64,
    z: &RandomSample,
    cfg: &TsfpConfig,
) -> Result<WaveField> {
    let steps = cfg.steps()?;
    let mut out = field.clone();
    if steps == 0 {
        return Ok(out);
    }
    let mut prop = TsfpPropagator::new(field, v, z, cfg.tau)?;
    prop.advance(&mut out.values, steps);
    out.t = field.t + cfg.t_final;
    Ok(out)
}
