//! Certified predictor-corrector interior-point method for
//! `min ½zᵀHz + hᵀz  s.t.  −1 ≤ z ≤ 1` with `H ≻ 0`.
//!
//! The solver starts from a closed-form point in the central-path
//! neighborhood, so the iteration count is bounded a priori by
//! [`certified_iteration_bound`] regardless of the data.

mod certificate;
pub mod format;
mod iterate;
mod newton;
mod problem;
mod solver;

pub use certificate::{
    certified_iteration_bound, contraction_factor, CONTRACTION_CONSTANT, NEIGHBORHOOD_BETA,
};
pub use iterate::{initialize, neighborhood_residual, IpmIterate};
pub use newton::{newton_direction, newton_direction_structured, Backend, Direction};
pub use problem::{BoxQpProblem, HessianForm, KoopmanHessian};
pub use solver::{
    predictor_step_size, solve, solve_with, BoxQpSolver, IterationEvent, IterationRecord,
    SolveReport, SolverOptions, DEFAULT_EPSILON,
};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("tolerance {epsilon} must lie in (0, 2n) = (0, {})", 2 * n)]
    InvalidTolerance { epsilon: f64, n: usize },
    #[error("cholesky factorization of the newton matrix failed")]
    FactorizationFailed,
    #[error("numerical breakdown in {stage} step of iteration {iteration}")]
    NumericalBreakdown { iteration: usize, stage: &'static str },
}
