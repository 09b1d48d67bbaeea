//! The benchmark problems: WKB data and potentials with random inputs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::defaults::{default_meshes, SolverMeshes};
use super::kl::{kl_eigenpairs, KLField};
use crate::error::{Error, Result};
use crate::field::{check_eps, scalar_field, Potential, WkbData};
use crate::sampling::RandomSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    /// Constant potential on `[0, 2]`, four random groups in the initial data.
    Test1,
    /// Harmonic oscillator on `[-pi, pi]`, three random groups.
    Test2a,
    /// Test 2(a) plus a random constant shift of the potential.
    Test2bShift,
    /// Test 2(a) data with a random quadratic potential.
    Test2bQuadratic,
    /// Test 2(a) with Karhunen–Loève random fields in place of the sums.
    Test2cKl,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::Test1,
        ProblemId::Test2a,
        ProblemId::Test2bShift,
        ProblemId::Test2bQuadratic,
        ProblemId::Test2cKl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Test1 => "test1",
            ProblemId::Test2a => "test2a",
            ProblemId::Test2bShift => "test2b_shift",
            ProblemId::Test2bQuadratic => "test2b_quadratic",
            ProblemId::Test2cKl => "test2c_kl",
        }
    }

    /// Number of random groups of length `d1`.
    pub fn groups(&self) -> usize {
        match self {
            ProblemId::Test1 | ProblemId::Test2bShift | ProblemId::Test2bQuadratic => 4,
            ProblemId::Test2a | ProblemId::Test2cKl => 3,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            ProblemId::Test1 => (0.0, 2.0),
            _ => (-PI, PI),
        }
    }

    pub fn default_t_final(&self) -> f64 {
        match self {
            ProblemId::Test1 => 0.5,
            ProblemId::Test2cKl => 0.1,
            _ => 1.0,
        }
    }

    pub fn default_p_range(&self) -> (f64, f64) {
        match self {
            ProblemId::Test1 => (-2.0, 2.0),
            _ => (-4.0, 4.0),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown problem '{s}' (expected one of test1, test2a, test2b_shift, test2b_quadratic, test2c_kl)"
                ))
            })
    }
}

/// A fully parameterized benchmark problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub d1: usize,
    pub eps: f64,
    pub domain: (f64, f64),
    pub t_final: f64,
    pub potential: Potential,
    pub wkb: WkbData,
    pub meshes: SolverMeshes,
    pub p_range: (f64, f64),
    pub kl: Option<Arc<KLField>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("d1", &self.d1)
            .field("eps", &self.eps)
            .field("domain", &self.domain)
            .field("t_final", &self.t_final)
            .field("p_range", &self.p_range)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Total random dimension `d`.
    pub fn random_dim(&self) -> usize {
        self.id.groups() * self.d1
    }

    pub fn with_t_final(mut self, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("final time must be >= 0, got {t}")));
        }
        self.t_final = t;
        Ok(self)
    }

    pub fn with_p_range(mut self, p_min: f64, p_max: f64) -> Result<Self> {
        if !(p_max > p_min) {
            return Err(Error::InvalidInput(format!(
                "momentum range [{p_min}, {p_max}] is empty"
            )));
        }
        self.p_range = (p_min, p_max);
        Ok(self)
    }
}

/// `sum_{k=1}^{d1} z_k / (2k)` over group `g`.
pub fn group_sum(z: &RandomSample, g: usize, d1: usize) -> f64 {
    z.group(g * d1, d1)
        .iter()
        .enumerate()
        .map(|(k, v)| v / (2.0 * (k + 1) as f64))
        .sum()
}

/// Correlation length, amplitude and quadrature size of the Test 2(c) field.
pub const KL_LENGTH: f64 = 0.5;
pub const KL_SIGMA: f64 = 0.05;
pub const KL_NODES_PER_MODE: usize = 16;

/// Uniform `z` on `[-1, 1]` rescaled to unit variance for the KL modes.
pub const KL_UNIT_VARIANCE_SCALE: f64 = 1.732_050_807_568_877_2;

pub fn make_problem(id: ProblemId, eps: f64, d1: usize) -> Result<ProblemSpec> {
    check_eps(eps)?;
    if d1 == 0 {
        return Err(Error::InvalidInput("per-group dimension d1 must be at least 1".into()));
    }
    let mut kl = None;
    let (wkb, potential) = match id {
        ProblemId::Test1 => (test1_data(d1), Potential::constant(10.0)),
        ProblemId::Test2a => (test2_data(eps, d1), Potential::harmonic()),
        ProblemId::Test2bShift => (test2_data(eps, d1), shifted_harmonic(d1)),
        ProblemId::Test2bQuadratic => (test2_data(eps, d1), random_quadratic(d1)),
        ProblemId::Test2cKl => {
            let field = Arc::new(kl_eigenpairs(
                KL_LENGTH,
                KL_SIGMA,
                d1,
                KL_NODES_PER_MODE * d1.max(4),
                id.domain(),
            )?);
            kl = Some(field.clone());
            (test2c_data(eps, d1, field), Potential::harmonic())
        }
    };
    Ok(ProblemSpec {
        id,
        d1,
        eps,
        domain: id.domain(),
        t_final: id.default_t_final(),
        potential,
        wkb,
        meshes: default_meshes(id, eps),
        p_range: id.default_p_range(),
        kl,
    })
}

fn test1_data(d1: usize) -> WkbData {
    let n0 = scalar_field(move |x, z| {
        let width = 1.0 + 0.8 * group_sum(z, 0, d1);
        let u = x - 1.0 + 0.2 * group_sum(z, 1, d1);
        let g = (-50.0 * width * u * u).exp();
        g * g
    });
    // S0 = -(1/5) ln(e^a + e^b), a = 5 u_r, b = -5 u_s, evaluated stably.
    let s0 = scalar_field(move |x, z| {
        let a = 5.0 * (x - 1.0 + 0.2 * group_sum(z, 2, d1));
        let b = -5.0 * (x - 1.0 + 0.2 * group_sum(z, 3, d1));
        let m = a.max(b);
        -(m + ((a - m).exp() + (b - m).exp()).ln()) / 5.0
    });
    let ds0 = scalar_field(move |x, z| {
        let a = 5.0 * (x - 1.0 + 0.2 * group_sum(z, 2, d1));
        let b = -5.0 * (x - 1.0 + 0.2 * group_sum(z, 3, d1));
        -((a - b) / 2.0).tanh()
    });
    WkbData::new(n0, s0).with_gradient(ds0)
}

fn test2_data(eps: f64, d1: usize) -> WkbData {
    let n0 = scalar_field(move |x, z| {
        let width = 1.0 + 0.6 * group_sum(z, 0, d1);
        let u = x + 1.0 - 0.4 * group_sum(z, 1, d1);
        (-width * u * u / eps).exp()
    });
    let s0 = scalar_field(move |x, z| x + 1.0 - 0.4 * group_sum(z, 2, d1));
    WkbData::new(n0, s0).with_gradient(scalar_field(|_, _| 1.0))
}

fn test2c_data(eps: f64, d1: usize, kl: Arc<KLField>) -> WkbData {
    let field = move |kl: &KLField, x: f64, z: &RandomSample, g: usize| -> f64 {
        z.group(g * d1, d1)
            .iter()
            .enumerate()
            .map(|(k, v)| KL_UNIT_VARIANCE_SCALE * v * kl.scaled_mode(k, x))
            .sum()
    };
    let (k0, k1, k2) = (kl.clone(), kl.clone(), kl);
    let n0 = scalar_field(move |x, z| {
        let width = 1.0 + 0.6 * field(&k0, x, z, 0);
        let u = x + 1.0 - 0.4 * field(&k0, x, z, 1);
        (-width * u * u / eps).exp()
    });
    let s0 = scalar_field(move |x, z| x + 1.0 - 0.4 * field(&k1, x, z, 2));
    let ds0 = scalar_field(move |x, z| {
        1.0 - 0.4
            * z.group(2 * d1, d1)
                .iter()
                .enumerate()
                .map(|(k, v)| KL_UNIT_VARIANCE_SCALE * v * k2.scaled_mode_derivative(k, x))
                .sum::<f64>()
    });
    WkbData::new(n0, s0).with_gradient(ds0)
}

/// `x^2/2 + 0.5 sum z_k / (2k)` with the shift drawn from the fourth group.
fn shifted_harmonic(d1: usize) -> Potential {
    Potential::new(
        scalar_field(move |x, z| 0.5 * x * x + 0.5 * group_sum(z, 3, d1)),
        scalar_field(|x, _| x),
        scalar_field(|_, _| 1.0),
    )
}

/// `sum z_k (k x / 10)^2` with coefficients from the fourth group.
fn random_quadratic(d1: usize) -> Potential {
    let coeff = move |z: &RandomSample| -> f64 {
        z.group(3 * d1, d1)
            .iter()
            .enumerate()
            .map(|(k, v)| v * ((k + 1) as f64 / 10.0).powi(2))
            .sum()
    };
    Potential::new(
        scalar_field(move |x, z| coeff(z) * x * x),
        scalar_field(move |x, z| 2.0 * coeff(z) * x),
        scalar_field(move |_, z| 2.0 * coeff(z)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_dimensions() {
        assert_eq!(make_problem(ProblemId::Test1, 1.0 / 64.0, 5).unwrap().random_dim(), 20);
        assert_eq!(make_problem(ProblemId::Test2a, 1.0 / 32.0, 5).unwrap().random_dim(), 15);
        assert_eq!(make_problem(ProblemId::Test2bShift, 1.0 / 32.0, 5).unwrap().random_dim(), 20);
        assert_eq!(make_problem(ProblemId::Test2cKl, 1.0 / 32.0, 3).unwrap().random_dim(), 9);
        assert!(make_problem(ProblemId::Test1, 0.0, 5).is_err());
        assert!(make_problem(ProblemId::Test1, 0.1, 0).is_err());
        assert!("test3".parse::<ProblemId>().is_err());
        assert_eq!("test2b_shift".parse::<ProblemId>().unwrap(), ProblemId::Test2bShift);
    }

    #[test]
    fn test1_at_the_origin() {
        let p = make_problem(ProblemId::Test1, 1.0 / 64.0, 5).unwrap();
        let z = RandomSample::zeros(20);
        for x in [0.3, 0.9, 1.0, 1.4, 1.95] {
            let n0 = (-50.0 * (x - 1.0f64).powi(2)).exp().powi(2);
            let s0 = -(2.0 * (5.0 * (x - 1.0f64)).cosh()).ln() / 5.0;
            assert!(((p.wkb.n0)(x, &z) - n0).abs() < 1e-15);
            assert!(((p.wkb.s0)(x, &z) - s0).abs() < 1e-14);
            let h = 1e-6;
            let fd = ((p.wkb.s0)(x + h, &z) - (p.wkb.s0)(x - h, &z)) / (2.0 * h);
            assert!((p.wkb.ds0.as_ref().unwrap()(x, &z) - fd).abs() < 1e-8);
        }
        assert_eq!((p.potential.value)(0.5, &z), 10.0);
    }

    #[test]
    fn test1_groups_act_independently() {
        let p = make_problem(ProblemId::Test1, 1.0 / 64.0, 2).unwrap();
        let mut v = vec![0.0; 8];
        v[2] = 1.0; // first entry of the position-shift group
        let z = RandomSample::new(v).unwrap();
        // Peak moves from 1 to 1 - 0.2 * (1/2).
        assert!(((p.wkb.n0)(0.9, &z) - 1.0).abs() < 1e-15);
        assert_eq!((p.wkb.s0)(0.9, &z), (p.wkb.s0)(0.9, &RandomSample::zeros(8)));
    }

    #[test]
    fn random_potentials() {
        let p = make_problem(ProblemId::Test2bQuadratic, 1.0 / 32.0, 2).unwrap();
        let z = RandomSample::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]).unwrap();
        let c = 0.01 - 0.04;
        assert!(((p.potential.value)(2.0, &z) - 4.0 * c).abs() < 1e-15);
        assert!(((p.potential.gradient)(2.0, &z) - 4.0 * c).abs() < 1e-15);
        let p = make_problem(ProblemId::Test2bShift, 1.0 / 32.0, 2).unwrap();
        assert!(((p.potential.value)(0.0, &z) - 0.5 * (0.5 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn kl_phase_gradient_matches_finite_differences() {
        let p = make_problem(ProblemId::Test2cKl, 1.0 / 32.0, 3).unwrap();
        let z = RandomSample::new(vec![0.3, -0.2, 0.9, 0.1, 0.5, -0.7, 0.8, -0.6, 0.4]).unwrap();
        for x in [-2.0, -0.5, 0.7] {
            let h = 1e-5;
            let fd = ((p.wkb.s0)(x + h, &z) - (p.wkb.s0)(x - h, &z)) / (2.0 * h);
            assert!((p.wkb.ds0.as_ref().unwrap()(x, &z) - fd).abs() < 1e-7);
        }
    }
}
