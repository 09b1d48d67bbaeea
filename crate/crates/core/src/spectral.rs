//! Discrete Fourier transforms on a periodic grid.
//!
//! Coefficients follow the trigonometric-interpolation convention
//! `u~_l = (1/n) sum_j u_j exp(-i mu_l (x_j - a))`: the forward transform is
//! unnormalized and the inverse carries the `1/n`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::SpatialGrid1D;

/// Forward/inverse FFT plans and scratch space for one grid size.
///
/// Not `Sync`-shared on purpose: every solve owns its workspace.
pub struct SpectralWorkspace {
    grid: SpatialGrid1D,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    wavenumbers: Vec<f64>,
}

impl SpectralWorkspace {
    pub fn new(grid: SpatialGrid1D) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            wavenumbers: (0..grid.n()).map(|k| grid.wavenumber(k)).collect(),
        }
    }

    pub fn grid(&self) -> &SpatialGrid1D {
        &self.grid
    }

    /// `mu_l` in FFT bin order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// In place, unnormalized.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// In place, including the `1/n` factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Derivative of the trigonometric interpolant of `values`, sampled at the nodes.
    ///
    /// Every mode `l = -n/2 .. n/2-1` is multiplied by `i mu_l`, including the
    /// Nyquist mode `l = -n/2`.
    pub fn derivative(&mut self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (c, &mu) in buf.iter_mut().zip(&self.wavenumbers) {
            *c *= Complex64::new(0.0, mu);
        }
        self.inverse(&mut buf);
        buf
    }

    /// Real-valued convenience wrapper around [`derivative`](Self::derivative)
    /// that drops the Nyquist mode, so real data yields a real derivative.
    pub fn derivative_real(&mut self, values: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        let nyquist = buf.len() / 2;
        for (k, (c, &mu)) in buf.iter_mut().zip(&self.wavenumbers).enumerate() {
            *c *= if k == nyquist {
                Complex64::default()
            } else {
                Complex64::new(0.0, mu)
            };
        }
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}
