//! Wavefunctions, WKB initial data, potentials and observable extraction.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ObservablePair, SpatialGrid1D};
use crate::sampling::RandomSample;
use crate::spectral::SpectralWorkspace;

/// A real function of position and random parameter.
pub type ScalarField = Arc<dyn Fn(f64, &RandomSample) -> f64 + Send + Sync>;

/// Wrap a closure as a [`ScalarField`].
pub fn scalar_field<F>(f: F) -> ScalarField
where
    F: Fn(f64, &RandomSample) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Complex samples `Psi_j ~ psi(t, x_j)` of a wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: SpatialGrid1D,
    pub eps: f64,
    pub t: f64,
    pub values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: SpatialGrid1D, eps: f64, t: f64, values: Vec<Complex64>) -> Result<Self> {
        check_eps(eps)?;
        if values.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "wavefunction has {} samples, grid has {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(j) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Domain(format!("wavefunction value at node {j} is not finite")));
        }
        Ok(Self { grid, eps, t, values })
    }

    pub fn zeros(grid: SpatialGrid1D, eps: f64) -> Result<Self> {
        Self::new(grid, eps, 0.0, vec![Complex64::default(); grid.n()])
    }

    /// `sqrt(h sum |Psi_j|^2)`.
    pub fn l2_norm(&self) -> f64 {
        crate::grid::discrete_l2_norm(&self.values, self.grid.h())
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "semiclassical parameter must lie in (0, 1], got {eps}"
        )))
    }
}

/// WKB initial data `sqrt(n0) exp(i S0 / eps)`.
///
/// `ds0` is an optional closed-form phase gradient; solvers that need
/// `dS0/dx` fall back to spectral differentiation without it.
#[derive(Clone)]
pub struct WkbData {
    pub n0: ScalarField,
    pub s0: ScalarField,
    pub ds0: Option<ScalarField>,
}

impl fmt::Debug for WkbData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WkbData")
            .field("analytic_gradient", &self.ds0.is_some())
            .finish_non_exhaustive()
    }
}

impl WkbData {
    pub fn new(n0: ScalarField, s0: ScalarField) -> Self {
        Self { n0, s0, ds0: None }
    }

    pub fn with_gradient(mut self, ds0: ScalarField) -> Self {
        self.ds0 = Some(ds0);
        self
    }

    /// `dS0/dx` on the grid, analytic when available.
    pub fn phase_gradient(&self, grid: &SpatialGrid1D, z: &RandomSample) -> Vec<f64> {
        match &self.ds0 {
            Some(ds0) => grid.nodes().iter().map(|&x| ds0(x, z)).collect(),
            None => {
                let s: Vec<f64> = grid.nodes().iter().map(|&x| (self.s0)(x, z)).collect();
                SpectralWorkspace::new(*grid).derivative_real(&s)
            }
        }
    }
}

/// Sample WKB data on the grid at `t = 0`.
pub fn wkb_initial(
    data: &WkbData,
    z: &RandomSample,
    eps: f64,
    grid: &SpatialGrid1D,
) -> Result<WaveField> {
    check_eps(eps)?;
    let mut values = Vec::with_capacity(grid.n());
    for (j, x) in grid.nodes().into_iter().enumerate() {
        let n0 = (data.n0)(x, z);
        if n0 < 0.0 || !n0.is_finite() {
            return Err(Error::Domain(format!(
                "initial density n0 = {n0} at node {j} (x = {x}) is negative or not finite"
            )));
        }
        let phase = (data.s0)(x, z) / eps;
        values.push(Complex64::from_polar(n0.sqrt(), phase));
    }
    WaveField::new(*grid, eps, 0.0, values)
}

/// `rho = |psi|^2` and `J = eps Im(conj(psi) d_x psi)` with a spectral `d_x`.
pub fn observables_from_wave(field: &WaveField) -> ObservablePair {
    let mut ws = SpectralWorkspace::new(field.grid);
    observables_with_workspace(&mut ws, field)
}

pub(crate) fn observables_with_workspace(
    ws: &mut SpectralWorkspace,
    field: &WaveField,
) -> ObservablePair {
    let d = ws.derivative(&field.values);
    let rho = field.values.iter().map(|v| v.norm_sqr()).collect();
    let current = field
        .values
        .iter()
        .zip(&d)
        .map(|(v, dv)| field.eps * (v.conj() * dv).im)
        .collect();
    ObservablePair {
        grid: field.grid,
        rho,
        current,
    }
}

/// Potential `V(x, z)` with its first two spatial derivatives.
#[derive(Clone)]
pub struct Potential {
    pub value: ScalarField,
    pub gradient: ScalarField,
    pub hessian: ScalarField,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").finish_non_exhaustive()
    }
}

impl Potential {
    pub fn new(value: ScalarField, gradient: ScalarField, hessian: ScalarField) -> Self {
        Self {
            value,
            gradient,
            hessian,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(
            scalar_field(move |_, _| c),
            scalar_field(|_, _| 0.0),
            scalar_field(|_, _| 0.0),
        )
    }

    /// `V = x^2 / 2`.
    pub fn harmonic() -> Self {
        Self::new(
            scalar_field(|x, _| 0.5 * x * x),
            scalar_field(|x, _| x),
            scalar_field(|_, _| 1.0),
        )
    }
}
