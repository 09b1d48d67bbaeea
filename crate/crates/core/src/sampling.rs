//! Random parameter samples on `[-1, 1]^d`.
//!
//! Samples come from a ChaCha8 stream seeded with `seed` through
//! `ChaCha8Rng::seed_from_u64`. Each coordinate consumes one `u64`; its top
//! 53 bits `m` map to `2 m / 2^53 - 1`. Both steps are specified bit for bit,
//! so a seed reproduces the same samples on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `z` of the random parameter space `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RandomSample(Vec<f64>);

impl RandomSample {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = z.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
            return Err(Error::Domain(format!(
                "random sample component {i} = {v} lies outside [-1, 1]"
            )));
        }
        Ok(Self(z))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Components `[start, start + len)`, e.g. one random group of a problem.
    pub fn group(&self, start: usize, len: usize) -> &[f64] {
        &self.0[start..start + len]
    }
}

impl TryFrom<Vec<f64>> for RandomSample {
    type Error = Error;

    fn try_from(z: Vec<f64>) -> Result<Self> {
        Self::new(z)
    }
}

impl From<RandomSample> for Vec<f64> {
    fn from(s: RandomSample) -> Self {
        s.0
    }
}

/// `count` i.i.d. uniform samples on `[-1, 1]^d`, reproducible from `seed`.
pub fn sample_uniform(d: usize, count: usize, seed: u64) -> Vec<RandomSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| RandomSample((0..d).map(|_| unit_interval(rng.next_u64())).collect()))
        .collect()
}

fn unit_interval(bits: u64) -> f64 {
    let m = (bits >> 11) as f64;
    2.0 * m * (1.0 / (1u64 << 53) as f64) - 1.0
}
