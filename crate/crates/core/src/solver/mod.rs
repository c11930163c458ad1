//! Discretised buoyancy-driven cavity physics on a single block.

mod boundary;
mod norms;
mod params;
mod residual;
mod step;

use thiserror::Error;

pub use boundary::{apply_boundary_conditions, WallKind};
pub use norms::{residual_norm, ConvergenceMonitor, ExactSum, NormAccumulator, ResidualNorms};
pub use params::{FluidParams, SolverConfig};
pub use residual::{compute_beta, compute_residual, compute_residual_region, fourth_difference};
pub use step::{compute_dt, euler_step, euler_step_region, rescale_pressure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("non-finite values while computing the {0}")]
    NonFinite(&'static str),
    #[error("solution diverged at iteration {iteration}")]
    Diverged { iteration: usize },
}
