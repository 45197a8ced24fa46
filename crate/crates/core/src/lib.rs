//! Steady logistic-diffusive populations: solvers, adjoint derivatives,
//! large-diffusivity expansion and resource optimization on intervals and boxes.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod optimizer;
pub mod profiles;
pub mod rearrangement;
pub mod report;
pub mod sensitivity;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{dirichlet_energy, mean, neumann_laplacian_apply, Field, Grid, ResourceBudget};
pub use optimizer::{OptimizationResult, OptimizerConfig, StartKind};
pub use steady::{solve_steady_state, total_population, SolverOptions, SteadyState};
