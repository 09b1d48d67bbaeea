//! Karhunen–Loève modes of a Gaussian covariance by the Nyström method.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::gauss_legendre;

/// Leading eigenpairs of `K phi(x) = int c(x - y) phi(y) dy` with
/// `c(r) = sigma^2 exp(-r^2 / l^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLField {
    pub l: f64,
    pub sigma: f64,
    /// Descending.
    pub eigvals: Vec<f64>,
    /// `eigfuncs[k][j] = phi_k(nodes[j])`, unit `L2` norm under `weights`.
    pub eigfuncs: Vec<Vec<f64>>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KLField {
    pub fn covariance(&self, r: f64) -> f64 {
        self.sigma * self.sigma * (-(r * r) / (self.l * self.l)).exp()
    }

    fn covariance_derivative(&self, r: f64) -> f64 {
        -2.0 * r / (self.l * self.l) * self.covariance(r)
    }

    /// `sqrt(lambda_k) phi_k(x)` at any `x`, by Nyström interpolation.
    pub fn scaled_mode(&self, k: usize, x: f64) -> f64 {
        self.interpolate(k, x, |r| self.covariance(r))
    }

    /// `sqrt(lambda_k) phi_k'(x)`.
    pub fn scaled_mode_derivative(&self, k: usize, x: f64) -> f64 {
        self.interpolate(k, x, |r| self.covariance_derivative(r))
    }

    fn interpolate(&self, k: usize, x: f64, kernel: impl Fn(f64) -> f64) -> f64 {
        let lam = self.eigvals[k];
        if lam <= 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.eigfuncs[k])
            .map(|((&y, &w), &phi)| w * kernel(x - y) * phi)
            .sum();
        s / lam.sqrt()
    }

    /// `phi_k(x)` off the quadrature nodes.
    pub fn mode(&self, k: usize, x: f64) -> f64 {
        let lam = self.eigvals[k];
        if lam <= 0.0 {
            return 0.0;
        }
        self.scaled_mode(k, x) / lam.sqrt()
    }
}

pub fn kl_eigenpairs(l: f64, sigma: f64, d1: usize, nq: usize, domain: (f64, f64)) -> Result<KLField> {
    if d1 == 0 || nq < 8 * d1 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 quadrature nodes per mode, got {nq} for {d1} modes"
        )));
    }
    if !(l > 0.0) || !(sigma >= 0.0) || !(domain.1 > domain.0) {
        return Err(Error::InvalidInput(format!(
            "invalid covariance parameters l = {l}, sigma = {sigma} on {domain:?}"
        )));
    }
    let (a, b) = domain;
    let (ref_nodes, ref_weights) = gauss_legendre(nq)?;
    let nodes: Vec<f64> = ref_nodes.iter().map(|t| 0.5 * (a + b) + 0.5 * (b - a) * t).collect();
    let weights: Vec<f64> = ref_weights.iter().map(|w| w * (b - a)).collect();
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let cov = |r: f64| sigma * sigma * (-(r * r) / (l * l)).exp();
    let m = DMatrix::from_fn(nq, nq, |i, j| sqrt_w[i] * cov(nodes[i] - nodes[j]) * sqrt_w[j]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..nq).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    if let Some(&last) = order.last() {
        let smallest = eig.eigenvalues[last];
        if smallest < -1e-10 {
            return Err(Error::Numerical(format!(
                "covariance matrix is not positive semidefinite (eigenvalue {smallest:e})"
            )));
        }
    }
    let mut eigvals = Vec::with_capacity(d1);
    let mut eigfuncs = Vec::with_capacity(d1);
    for &i in order.iter().take(d1) {
        let v = eig.eigenvectors.column(i);
        // Fix the sign so that sum_j (j + 1) v_j > 0.
        let orient: f64 = v.iter().enumerate().map(|(j, x)| (j + 1) as f64 * x).sum();
        let sign = if orient < 0.0 { -1.0 } else { 1.0 };
        let phi: Vec<f64> = v.iter().zip(&sqrt_w).map(|(x, s)| sign * x / s).collect();
        let norm = phi
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * p * p)
            .sum::<f64>()
            .sqrt();
        eigvals.push(eig.eigenvalues[i].max(0.0));
        eigfuncs.push(phi.into_iter().map(|p| p / norm).collect());
    }
    Ok(KLField {
        l,
        sigma,
        eigvals,
        eigfuncs,
        nodes,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_amplitude_has_zero_spectrum() {
        let f = kl_eigenpairs(0.5, 0.0, 3, 64, (-PI, PI)).unwrap();
        assert!(f.eigvals.iter().all(|&l| l == 0.0));
        assert_eq!(f.scaled_mode(0, 0.3), 0.0);
    }

    #[test]
    fn spectrum_is_positive_and_descending() {
        let f = kl_eigenpairs(0.5, 0.05, 5, 80, (-PI, PI)).unwrap();
        assert!(f.eigvals.iter().all(|&l| l > 0.0));
        assert!(f.eigvals.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn modes_are_orthonormal() {
        let f = kl_eigenpairs(0.5, 0.05, 5, 80, (-PI, PI)).unwrap();
        for j in 0..5 {
            for k in 0..5 {
                let ip: f64 = (0..f.nodes.len())
                    .map(|m| f.weights[m] * f.eigfuncs[j][m] * f.eigfuncs[k][m])
                    .sum();
                if j == k {
                    assert!((ip - 1.0).abs() < 1e-10);
                } else {
                    assert!(ip.abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn nystrom_interpolation_matches_nodes() {
        let f = kl_eigenpairs(0.5, 0.05, 3, 64, (-PI, PI)).unwrap();
        for k in 0..3 {
            for j in [0, 17, 40] {
                let x = f.nodes[j];
                assert!((f.mode(k, x) - f.eigfuncs[k][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn leading_eigenvalue_converges() {
        let a = kl_eigenpairs(0.5, 0.05, 2, 40, (-PI, PI)).unwrap();
        let b = kl_eigenpairs(0.5, 0.05, 2, 80, (-PI, PI)).unwrap();
        assert!((a.eigvals[0] - b.eigvals[0]).abs() <= 1e-3 * b.eigvals[0]);
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(kl_eigenpairs(0.5, 0.05, 5, 39, (-PI, PI)).is_err());
    }
}
