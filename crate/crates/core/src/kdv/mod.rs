//! Forced Korteweg–de Vries plant `y_t + y·y_x + y_xxx = Σᵢ uᵢ·vᵢ(x)` on a
//! periodic grid, simulated with a split-step Fourier scheme.

mod closed_loop;
mod config;
mod dataset;
mod stepper;

pub use closed_loop::{closed_loop, ClosedLoopOptions, TrajectoryLog};
pub use config::{sinusoidal_reference, KdvConfig, SinusoidalReference};
pub use dataset::{generate_dataset, DatasetStats};
pub use stepper::{kdv_step, soliton, KdvStepper};

#[derive(Debug, thiserror::Error)]
pub enum KdvError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state became non-finite during step {step}")]
    BlowUp { step: usize },
    #[error("every one of {attempts} attempts for trajectory {trajectory} blew up")]
    ResampleLimit { trajectory: usize, attempts: usize },
    #[error("solver failed at sampling instant {instant}: {source}")]
    Solver {
        instant: usize,
        #[source]
        source: crate::boxqp::SolverError,
    },
    #[error(transparent)]
    Condense(#[from] crate::condensing::CondenseError),
    #[error(transparent)]
    Edmd(#[from] crate::koopman::EdmdError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
