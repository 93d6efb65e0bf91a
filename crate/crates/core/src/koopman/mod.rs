//! Thin-plate RBF lifting and EDMD identification of a linear Koopman predictor.

mod edmd;
mod lift;
mod model;
mod snapshots;

pub use edmd::{
    edmd_objective, fit_edmd, fit_with_holdout, one_step_rms, persistence_rms, FitReport,
    DEFAULT_RIDGE,
};
pub use lift::{sample_rbf_centers, thin_plate, LiftSpec, DEFAULT_CENTER_SEED};
pub use model::{KoopmanModel, ModelFile};
pub use snapshots::SnapshotSet;

#[derive(Debug, thiserror::Error)]
pub enum EdmdError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("snapshot data contains non-finite values")]
    NonFinite,
    #[error("ridge must be non-negative, got {0}")]
    InvalidRidge(f64),
    #[error("regressor matrix is rank deficient (smallest singular value {smallest_singular_value:e}); use a positive ridge")]
    RankDeficient { smallest_singular_value: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
