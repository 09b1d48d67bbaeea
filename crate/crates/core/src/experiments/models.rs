//! The three solvers wrapped as [`FidelityModel`]s for a benchmark problem.

use std::sync::Arc;

use super::defaults::{FgaMesh, LsMesh, MeshSpec, TsfpMesh};
use super::problems::ProblemSpec;
use crate::error::{Error, Result};
use crate::fga::{fga_decompose, fga_evolve, fga_reconstruct, PhaseBox, PotentialSlice};
use crate::field::{observables_from_wave, wkb_initial};
use crate::grid::{ObservablePair, SpatialGrid1D};
use crate::levelset::{cfl_timestep, ls_init, ls_observables, ls_solve, DeltaKernelSpec, PhaseGrid};
use crate::multifidelity::FidelityModel;
use crate::sampling::RandomSample;
use crate::tsfp::{tsfp_solve, TsfpConfig};

/// Time-splitting spectral reference solver.
pub struct TsfpModel {
    name: String,
    problem: ProblemSpec,
    mesh: TsfpMesh,
    grid: SpatialGrid1D,
}

impl TsfpModel {
    pub fn new(problem: ProblemSpec, mesh: TsfpMesh) -> Result<Self> {
        let grid = SpatialGrid1D::new(problem.domain.0, problem.domain.1, mesh.n)?;
        if !(mesh.dt > 0.0) {
            return Err(Error::InvalidInput(format!("tsfp dt must be > 0, got {}", mesh.dt)));
        }
        Ok(Self {
            name: format!("tsfp(n={})", mesh.n),
            problem,
            mesh,
            grid,
        })
    }

    pub fn solve_wave(&self, z: &RandomSample) -> Result<crate::field::WaveField> {
        let p = &self.problem;
        let psi0 = wkb_initial(&p.wkb, z, p.eps, &self.grid)?;
        let cfg = TsfpConfig::with_max_step(self.mesh.dt, p.t_final)?;
        tsfp_solve(&psi0, &*p.potential.value, z, &cfg)
    }
}

impl FidelityModel for TsfpModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn random_dim(&self) -> usize {
        self.problem.random_dim()
    }

    fn grid(&self) -> SpatialGrid1D {
        self.grid
    }

    fn evaluate(&self, z: &RandomSample) -> Result<ObservablePair> {
        Ok(observables_from_wave(&self.solve_wave(z)?))
    }
}

/// Frozen Gaussian approximation.
pub struct FgaModel {
    name: String,
    problem: ProblemSpec,
    mesh: FgaMesh,
    grid: SpatialGrid1D,
    quad_grid: SpatialGrid1D,
    bounds: PhaseBox,
}

impl FgaModel {
    pub fn new(problem: ProblemSpec, mesh: FgaMesh) -> Result<Self> {
        let (a, b) = problem.domain;
        let grid = SpatialGrid1D::new(a, b, mesh.n)?;
        let quad_grid = SpatialGrid1D::new(a, b, mesh.quad_n)?;
        let bounds = PhaseBox::new(mesh.q_min, mesh.q_max, mesh.p_min, mesh.p_max)?;
        if !(mesh.dt > 0.0) {
            return Err(Error::InvalidInput(format!("fga dt must be > 0, got {}", mesh.dt)));
        }
        if !(0.0..1.0).contains(&mesh.keep_threshold) {
            return Err(Error::InvalidInput(format!(
                "fga keep_threshold must lie in [0, 1), got {}",
                mesh.keep_threshold
            )));
        }
        Ok(Self {
            name: format!("fga(n={})", mesh.n),
            problem,
            mesh,
            grid,
            quad_grid,
            bounds,
        })
    }

    pub fn solve_wave(&self, z: &RandomSample) -> Result<crate::field::WaveField> {
        let p = &self.problem;
        let psi0 = wkb_initial(&p.wkb, z, p.eps, &self.quad_grid)?;
        let ens = fga_decompose(&psi0, self.bounds, self.mesh.nq, self.mesh.np, self.mesh.keep_threshold)?;
        let pot = &p.potential;
        let v0 = |x: f64| (pot.value)(x, z);
        let v1 = |x: f64| (pot.gradient)(x, z);
        let v2 = |x: f64| (pot.hessian)(x, z);
        let slice = PotentialSlice {
            v0: &v0,
            v1: &v1,
            v2: &v2,
        };
        let tau = TsfpConfig::with_max_step(self.mesh.dt, p.t_final)?.tau;
        let ens = fga_evolve(&ens, slice, tau, p.t_final)?;
        fga_reconstruct(&ens, &self.grid)
    }
}

impl FidelityModel for FgaModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn random_dim(&self) -> usize {
        self.problem.random_dim()
    }

    fn grid(&self) -> SpatialGrid1D {
        self.grid
    }

    fn evaluate(&self, z: &RandomSample) -> Result<ObservablePair> {
        Ok(observables_from_wave(&self.solve_wave(z)?))
    }
}

/// Level-set Liouville solver.
pub struct LevelSetModel {
    name: String,
    problem: ProblemSpec,
    mesh: LsMesh,
    pgrid: PhaseGrid,
    kernel: DeltaKernelSpec,
}

impl LevelSetModel {
    pub fn new(problem: ProblemSpec, mesh: LsMesh) -> Result<Self> {
        let (a, b) = problem.domain;
        let xgrid = SpatialGrid1D::new(a, b, mesh.nx)?;
        let pgrid = PhaseGrid::with_dp(xgrid, mesh.p_min, mesh.p_max, mesh.dp)?;
        let kernel = DeltaKernelSpec::on_grid(mesh.kernel, mesh.kappa, pgrid.dp())?;
        if let Some(dt) = mesh.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput(format!("ls dt must be > 0, got {dt}")));
            }
        }
        Ok(Self {
            name: format!("ls(nx={})", mesh.nx),
            problem,
            mesh,
            pgrid,
            kernel,
        })
    }

    pub fn phase_grid(&self) -> &PhaseGrid {
        &self.pgrid
    }
}

impl FidelityModel for LevelSetModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn random_dim(&self) -> usize {
        self.problem.random_dim()
    }

    fn grid(&self) -> SpatialGrid1D {
        self.pgrid.xgrid
    }

    fn evaluate(&self, z: &RandomSample) -> Result<ObservablePair> {
        let p = &self.problem;
        let state = ls_init(&p.wkb, z, &self.pgrid)?;
        let v1 = |x: f64| (p.potential.gradient)(x, z);
        let max_dt = match self.mesh.dt {
            Some(dt) => dt,
            None => cfl_timestep(&self.pgrid, &v1, self.mesh.cfl)?,
        };
        let dt = TsfpConfig::with_max_step(max_dt, p.t_final)?.tau;
        let state = ls_solve(&state, &v1, dt, p.t_final)?;
        ls_observables(&state, &self.kernel)
    }
}

/// Build the solver described by `mesh` for `problem`.
pub fn build_model(problem: &ProblemSpec, mesh: &MeshSpec) -> Result<Arc<dyn FidelityModel>> {
    Ok(match *mesh {
        MeshSpec::Tsfp(m) => Arc::new(TsfpModel::new(problem.clone(), m)?),
        MeshSpec::Fga(m) => Arc::new(FgaModel::new(problem.clone(), m)?),
        MeshSpec::Ls(m) => Arc::new(LevelSetModel::new(problem.clone(), m)?),
    })
}

/// A one-dimensional model `z -> inner((z, z, ..., z))`.
pub struct DiagonalSlice {
    inner: Arc<dyn FidelityModel>,
    name: String,
}

impl DiagonalSlice {
    pub fn new(inner: Arc<dyn FidelityModel>) -> Self {
        let name = format!("diag[{}]", inner.name());
        Self { inner, name }
    }
}

impl FidelityModel for DiagonalSlice {
    fn name(&self) -> &str {
        &self.name
    }

    fn random_dim(&self) -> usize {
        1
    }

    fn grid(&self) -> SpatialGrid1D {
        self.inner.grid()
    }

    fn evaluate(&self, z: &RandomSample) -> Result<ObservablePair> {
        if z.dim() != 1 {
            return Err(Error::InvalidInput(format!(
                "diagonal slice takes one coordinate, got {}",
                z.dim()
            )));
        }
        let full = RandomSample::new(vec![z.as_slice()[0]; self.inner.random_dim()])?;
        self.inner.evaluate(&full)
    }
}
