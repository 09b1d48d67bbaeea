//! Periodic spatial grids and the observables carried on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[a, b)` with `n` nodes `x_j = a + j h`.
///
/// The right endpoint is identified with the left one and is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid1D {
    a: f64,
    b: f64,
    n: usize,
}

impl SpatialGrid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidInput(format!(
                "grid endpoints must satisfy a < b, got [{a}, {b}]"
            )));
        }
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "grid size must be even and positive, got {n}"
            )));
        }
        Ok(Self { a, b, n })
    }

    /// Grid whose spacing is as close as possible to `dx` with an even node count.
    pub fn with_spacing(a: f64, b: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidInput(format!("spacing must be positive, got {dx}")));
        }
        let raw = ((b - a) / dx).round() as usize;
        let n = raw.max(2).div_ceil(2) * 2;
        Self::new(a, b, n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumber `mu_l = 2 pi l / (b - a)` of FFT bin `k`
    /// (bins `k >= n/2` carry the negative modes `l = k - n`).
    pub fn wavenumber(&self, k: usize) -> f64 {
        let l = if k < self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        };
        2.0 * std::f64::consts::PI * l / self.len()
    }
}

/// Position density and current density sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservablePair {
    pub grid: SpatialGrid1D,
    pub rho: Vec<f64>,
    pub current: Vec<f64>,
}

impl ObservablePair {
    pub fn new(grid: SpatialGrid1D, rho: Vec<f64>, current: Vec<f64>) -> Result<Self> {
        if rho.len() != grid.n() || current.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "observable lengths ({}, {}) do not match grid size {}",
                rho.len(),
                current.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, rho, current })
    }

    pub fn zeros(grid: SpatialGrid1D) -> Self {
        Self {
            grid,
            rho: vec![0.0; grid.n()],
            current: vec![0.0; grid.n()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().chain(&self.current).all(|v| v.is_finite())
    }

    /// `h * sum(rho)`, the total mass.
    pub fn mass(&self) -> f64 {
        self.grid.h() * self.rho.iter().sum::<f64>()
    }
}

/// Anything with a squared modulus; lets [`discrete_l2_norm`] take real or
/// complex vectors.
pub trait SquaredModulus {
    fn modulus_sqr(&self) -> f64;
}

impl SquaredModulus for f64 {
    fn modulus_sqr(&self) -> f64 {
        self * self
    }
}

impl SquaredModulus for Complex64 {
    fn modulus_sqr(&self) -> f64 {
        self.norm_sqr()
    }
}

/// `sqrt(h * sum |v_j|^2)`.
pub fn discrete_l2_norm<T: SquaredModulus>(v: &[T], h: f64) -> f64 {
    (h * v.iter().map(SquaredModulus::modulus_sqr).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_inverted_grids() {
        assert!(SpatialGrid1D::new(0.0, 1.0, 3).is_err());
        assert!(SpatialGrid1D::new(0.0, 1.0, 0).is_err());
        assert!(SpatialGrid1D::new(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn spacing_is_exact() {
        let g = SpatialGrid1D::new(-1.0, 3.0, 8).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.x(0), -1.0);
        assert_eq!(g.x(7), 2.5);
        assert_eq!(g.nodes().len(), 8);
    }

    #[test]
    fn with_spacing_rounds_to_even() {
        let g = SpatialGrid1D::with_spacing(0.0, 2.0, 0.0312).unwrap();
        assert_eq!(g.n(), 64);
        let g = SpatialGrid1D::with_spacing(0.0, 2.0, 0.001).unwrap();
        assert_eq!(g.n(), 2000);
    }

    #[test]
    fn wavenumbers_follow_fft_ordering() {
        let g = SpatialGrid1D::new(0.0, 2.0 * std::f64::consts::PI, 8).unwrap();
        let mu: Vec<f64> = (0..8).map(|k| g.wavenumber(k)).collect();
        assert_eq!(mu, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn l2_norm_examples() {
        assert_eq!(discrete_l2_norm(&[1.0, 1.0, 1.0, 1.0], 0.25), 1.0);
        assert_eq!(discrete_l2_norm::<f64>(&[0.0; 5], 0.1), 0.0);
        assert_eq!(discrete_l2_norm(&[3.0, 4.0], 1.0), 5.0);
        let c = [Complex64::new(3.0, 4.0)];
        assert_eq!(discrete_l2_norm(&c, 1.0), 5.0);
    }
}
