//! Condensing of the Koopman MPC problem.
//!
//! The decision vector of the dynamics-relaxed BoxQP is
//! `z = col(U, X) = (u₀, …, u_{N−1}, x₁, …, x_N)`; the structured Hessian and
//! the Schur-complement solver both rely on this ordering.

mod boxqp;
mod general;
mod spec;
mod stack;

pub use boxqp::{build_boxqp, KoopmanBoxQp};
pub use general::{build_general_qp, GeneralQp};
pub use spec::NmpcSpec;
pub use stack::{build_prediction_stack, build_rbar, PredictionStack};

#[derive(Debug, thiserror::Error)]
pub enum CondenseError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid MPC specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Solver(#[from] crate::boxqp::SolverError),
}
