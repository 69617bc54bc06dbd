//! Equilibrium oracles, the frozen reference trajectory, shuffling variance
//! and closed-form convergence bounds.

mod bounds;
mod metrics;
mod ne;
mod reference;
mod variance;

use thiserror::Error;

use crate::game::GameError;

pub use bounds::{theory_bounds, TheoryBounds};
pub use metrics::{disagreement_norm, error_metric, loglog_slope, EstimateMatrix, E_FLOOR};
pub use ne::{solve_ne, solve_ne_affine, solve_ne_fixed_point, NeMethod, NeSolution, FIXED_POINT_MAX_ITERS, FIXED_POINT_TOL};
pub use reference::{reference_trajectory, ReferenceTrajectory};
pub use variance::{shuffling_variance_mc, ShuffleVarianceEstimate, DEFAULT_NUM_PERMS};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("affine solve needs an EV game")]
    NotAffine,
    #[error("equilibrium system is singular")]
    Singular,
    #[error("fixed-point iteration did not converge in {iters} iterations (last step {step:e})")]
    NoConvergence { iters: usize, step: f64 },
    #[error("initial point equals the equilibrium; the error metric is undefined")]
    DegenerateNormalization,
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("contraction factor {name} = {value} is outside (0, 1)")]
    Contraction { name: &'static str, value: f64 },
    #[error("bounds need a constant schedule")]
    NotConstant,
}
