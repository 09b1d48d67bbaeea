//! Versioned default meshes and time steps for every solver and problem.
//!
//! Published settings are used where they exist (see [`defaults_table`]);
//! everything else follows the scaling rules below, which reproduce the
//! published values at the published `eps`.

use serde::{Deserialize, Serialize};

use super::problems::ProblemId;
use crate::levelset::DeltaKernelKind;

/// Bumped whenever a default changes; recorded in every run manifest.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsfpMesh {
    /// Grid points.
    pub n: usize,
    /// Largest admissible time step; the actual step divides `t_final`.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgaMesh {
    /// Output grid points.
    pub n: usize,
    pub dt: f64,
    /// Grid for the initial wavefunction used in the decomposition quadrature.
    pub quad_n: usize,
    pub nq: usize,
    pub np: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub keep_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsMesh {
    pub nx: usize,
    pub dp: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Safety factor applied to the CFL step when `dt` is not given.
    pub cfl: f64,
    /// Kernel half-width in units of `dp`.
    pub kappa: usize,
    pub kernel: DeltaKernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Tsfp,
    Fga,
    Ls,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Tsfp => "tsfp",
            SolverKind::Fga => "fga",
            SolverKind::Ls => "ls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityRole {
    Low,
    Medium,
    High,
}

/// Default meshes of one problem at one `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverMeshes {
    pub tsfp: TsfpMesh,
    /// Coarse TSFP used as a medium-fidelity model: one tenth of the points.
    pub tsfp_coarse: TsfpMesh,
    pub fga: FgaMesh,
    pub ls: LsMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    Tsfp(TsfpMesh),
    Fga(FgaMesh),
    Ls(LsMesh),
}

impl MeshSpec {
    pub fn kind(&self) -> SolverKind {
        match self {
            MeshSpec::Tsfp(_) => SolverKind::Tsfp,
            MeshSpec::Fga(_) => SolverKind::Fga,
            MeshSpec::Ls(_) => SolverKind::Ls,
        }
    }
}

impl SolverMeshes {
    pub fn for_role(&self, kind: SolverKind, role: FidelityRole) -> MeshSpec {
        match (kind, role) {
            (SolverKind::Tsfp, FidelityRole::Medium) => MeshSpec::Tsfp(self.tsfp_coarse),
            (SolverKind::Tsfp, _) => MeshSpec::Tsfp(self.tsfp),
            (SolverKind::Fga, _) => MeshSpec::Fga(self.fga),
            (SolverKind::Ls, _) => MeshSpec::Ls(self.ls),
        }
    }
}

fn even(x: f64) -> usize {
    let n = x.round().max(2.0) as usize;
    n + n % 2
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs()
}

/// Published grid spacings `(tsfp, fga, ls)` for the first problem.
fn test1_spacings(eps: f64) -> (f64, f64, f64) {
    if near(eps, 1.0 / 64.0) {
        (0.001, 0.0312, 0.01)
    } else if near(eps, 1.0 / 256.0) {
        (0.00026, 0.0078, 0.0026)
    } else {
        (0.064 * eps, 2.0 * eps, 0.64 * eps)
    }
}

/// Published FGA grid sizes; TSFP uses ten times as many points at
/// `eps = 1/32` and five times at `eps = 1/128`.
fn test2_sizes(eps: f64) -> (usize, usize) {
    if near(eps, 1.0 / 32.0) {
        (3840, 384)
    } else if near(eps, 1.0 / 128.0) {
        (7680, 1536)
    } else {
        let fga = even(12.0 / eps);
        (10 * fga, fga)
    }
}

/// Particle-mesh spacing in units of `sqrt(eps)`.
pub const PARTICLE_SPACING: f64 = 0.4;

fn particle_mesh(q: (f64, f64), p: (f64, f64), eps: f64) -> (usize, usize) {
    let d = PARTICLE_SPACING * eps.sqrt();
    (
        ((q.1 - q.0) / d).ceil() as usize + 1,
        ((p.1 - p.0) / d).ceil() as usize + 1,
    )
}

pub fn default_meshes(id: ProblemId, eps: f64) -> SolverMeshes {
    let (a, b) = id.domain();
    let len = b - a;
    let (p_min, p_max) = id.default_p_range();
    let quad_n = even(4.0 * len / eps).max(256);
    let se = eps.sqrt();
    match id {
        ProblemId::Test1 => {
            let (hx, fx, lx) = test1_spacings(eps);
            let tsfp_n = even(len / hx);
            let q = (0.0, 2.0);
            let p = (-1.75, 1.75);
            let (nq, np) = particle_mesh(q, p, eps);
            SolverMeshes {
                // Exact for a constant potential at any step, so a coarse step suffices.
                tsfp: TsfpMesh { n: tsfp_n, dt: 1e-3 },
                tsfp_coarse: TsfpMesh {
                    n: even(tsfp_n as f64 / 10.0),
                    dt: 1e-3,
                },
                fga: FgaMesh {
                    n: even(len / fx),
                    dt: 1e-2,
                    quad_n,
                    nq,
                    np,
                    q_min: q.0,
                    q_max: q.1,
                    p_min: p.0,
                    p_max: p.1,
                    keep_threshold: 1e-3,
                },
                ls: LsMesh {
                    nx: even(len / lx),
                    dp: 0.1,
                    p_min,
                    p_max,
                    cfl: 0.5,
                    kappa: 2,
                    kernel: DeltaKernelKind::Cosine,
                    dt: None,
                },
            }
        }
        _ => {
            let (tsfp_n, fga_n) = test2_sizes(eps);
            let q = (-3.0, 1.0);
            let p = (1.0 - 7.0 * se - 0.1, 1.0 + 7.0 * se + 0.1);
            let (nq, np) = particle_mesh(q, p, eps);
            SolverMeshes {
                tsfp: TsfpMesh {
                    n: tsfp_n,
                    dt: len / tsfp_n as f64 / 20.0,
                },
                tsfp_coarse: TsfpMesh {
                    n: even(tsfp_n as f64 / 10.0),
                    dt: len / tsfp_n as f64 / 20.0,
                },
                fga: FgaMesh {
                    n: fga_n,
                    dt: len / fga_n as f64 / 20.0,
                    quad_n,
                    nq,
                    np,
                    q_min: q.0,
                    q_max: q.1,
                    p_min: p.0,
                    p_max: p.1,
                    keep_threshold: 1e-3,
                },
                ls: LsMesh {
                    nx: even(len / (0.64 * eps)),
                    dp: 0.1,
                    p_min,
                    p_max,
                    cfl: 0.5,
                    kappa: 2,
                    kernel: DeltaKernelKind::Cosine,
                    dt: None,
                },
            }
        }
    }
}

/// One row of the defaults table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefaultEntry {
    pub problem: &'static str,
    pub eps: &'static str,
    pub key: &'static str,
    pub value: &'static str,
    pub source: &'static str,
}

const PUBLISHED: &str = "published setting";
const OURS: &str = "our choice";

/// Where each default comes from.
pub fn defaults_table() -> Vec<DefaultEntry> {
    let e = |problem, eps, key, value, source| DefaultEntry {
        problem,
        eps,
        key,
        value,
        source,
    };
    vec![
        e("test1", "1/64", "fga.dx", "0.0312", PUBLISHED),
        e("test1", "1/64", "ls.dx, ls.dp", "0.01, 0.1", PUBLISHED),
        e("test1", "1/64", "tsfp.dx", "0.001", PUBLISHED),
        e("test1", "1/256", "fga.dx", "0.0078", PUBLISHED),
        e("test1", "1/256", "ls.dx, ls.dp", "0.0026, 0.1", PUBLISHED),
        e("test1", "1/256", "tsfp.dx", "0.00026", PUBLISHED),
        e("test1", "any", "ls.p range", "[-2, 2]", PUBLISHED),
        e("test1", "any", "t_final", "0.5", PUBLISHED),
        e("test1", "any", "tsfp.dt", "1e-3 (published 1e-5; splitting is exact for constant V)", OURS),
        e("test1", "any", "fga.dt", "1e-2 (published 1e-5; free-flight trajectories)", OURS),
        e("test2*", "1/32", "fga.n, tsfp.n", "384, 3840", PUBLISHED),
        e("test2*", "1/128", "fga.n, tsfp.n", "1536, 7680", PUBLISHED),
        e("test2*", "any", "dt", "dx / 20", PUBLISHED),
        e("test2a, test2b_*", "any", "t_final", "1 (published runs go to 6)", OURS),
        e("test2c_kl", "any", "t_final", "0.1", PUBLISHED),
        e("test2*", "any", "ls.p range", "[-4, 4]", OURS),
        e("all", "any", "fga particle spacing", "0.4 sqrt(eps), threshold 1e-3", OURS),
        e("all", "any", "fga phase-space box", "covers every admissible z", OURS),
        e("all", "any", "ls kernel", "cosine, eta = 2 dp", OURS),
        e("all", "any", "tsfp medium mesh", "n_high / 10", PUBLISHED),
        e("all", "any", "uq.M, uq.N", "200, 100 (published 1000, 1000)", OURS),
    ]
}
