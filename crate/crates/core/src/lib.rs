//! Multi-fidelity surrogates for the semiclassical Schrödinger equation with
//! random inputs.
//!
//! The crate provides three solvers of very different cost for
//! `i eps psi_t = -eps^2/2 psi_xx + V(x, z) psi` with WKB initial data:
//!
//! * [`tsfp`]: a time-splitting Fourier pseudospectral solver (high fidelity),
//! * [`fga`]: the frozen Gaussian approximation (medium fidelity),
//! * [`levelset`]: a level-set Liouville solver (low fidelity),
//!
//! and the bi-/tri-fidelity collocation method in [`multifidelity`] that
//! combines them. [`metrics`] and [`experiments`] reproduce the numerical
//! studies; [`config`] and [`csvio`] back the `mfschrod` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiments;
pub mod fga;
pub mod field;
pub mod grid;
pub mod levelset;
pub mod metrics;
pub mod multifidelity;
pub mod sampling;
pub mod spectral;
pub mod tsfp;

pub use error::{Error, Result};
pub use field::{
    observables_from_wave, scalar_field, wkb_initial, Potential, ScalarField, WaveField, WkbData,
};
pub use grid::{discrete_l2_norm, ObservablePair, SpatialGrid1D};
pub use sampling::{sample_uniform, RandomSample};
pub use tsfp::{tsfp_solve, tsfp_step, TsfpConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/tsfp.md")]
    struct Tsfp;
    #[doc = include_str!("../../../book/src/fga.md")]
    struct Fga;
    #[doc = include_str!("../../../book/src/levelset.md")]
    struct LevelSet;
    #[doc = include_str!("../../../book/src/multifidelity.md")]
    struct MultiFidelity;
    #[doc = include_str!("../../../book/src/bounds.md")]
    struct Bounds;
    #[doc = include_str!("../../../book/src/configuration.md")]
    struct Configuration;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
    #[doc = include_str!("../../../book/src/problems.md")]
    struct Problems;
}
