//! Benchmark problems, solver wrappers and the experiment runner.

pub mod defaults;
pub mod kl;
pub mod models;
pub mod problems;
pub mod runner;

pub use defaults::{default_meshes, FidelityRole, MeshSpec, SolverKind, SolverMeshes, DEFAULTS_VERSION};
pub use kl::{kl_eigenpairs, KLField};
pub use models::{build_model, DiagonalSlice, FgaModel, LevelSetModel, TsfpModel};
pub use problems::{make_problem, ProblemId, ProblemSpec};
pub use runner::{
    run_bound, run_diagnose, run_experiment, run_offline, run_online, run_sc_table, run_solve, Manifest,
    RunSummary,
};
