//! Experiment configuration. Every field is required: a missing key is a
//! schema error naming it, never a silent default.

use std::path::Path;

use anyhow::Context;
use koopman_boxqp::boxqp::Backend;
use koopman_boxqp::condensing::NmpcSpec;
use koopman_boxqp::kdv::{ClosedLoopOptions, KdvConfig, SinusoidalReference};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::SchemaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub data: DataSection,
    pub lift: LiftSection,
    pub mpc: MpcSection,
    pub solver: SolverSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub half_length: f64,
    pub n_grid: usize,
    pub dt: f64,
    pub profile_centers: Vec<f64>,
    pub profile_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n_traj: usize,
    pub traj_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSection {
    pub n_rbf: usize,
    pub center_seed: u64,
    /// Every state coordinate is sampled from `[lo, hi]`.
    pub center_bounds: [f64; 2],
    pub ridge: f64,
    pub holdout: f64,
}

/// Weights are scalars applied uniformly (`W = w·I`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    pub horizon: usize,
    pub w_x: f64,
    pub w_u: f64,
    pub w_du: f64,
    pub rho: f64,
    pub u_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub duration: f64,
    pub reference_amplitude: f64,
    pub reference_omega: f64,
    pub preview: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let plant = KdvConfig::default();
        let reference = SinusoidalReference::default();
        Self {
            plant: PlantSection {
                half_length: plant.half_length,
                n_grid: plant.n_grid,
                dt: plant.dt,
                profile_centers: plant.profile_centers,
                profile_width: plant.profile_width,
            },
            data: DataSection {
                n_traj: 1000,
                traj_len: 200,
                seed: 1,
            },
            lift: LiftSection {
                n_rbf: 200,
                center_seed: koopman_boxqp::koopman::DEFAULT_CENTER_SEED,
                center_bounds: [-1.0, 1.0],
                ridge: koopman_boxqp::koopman::DEFAULT_RIDGE,
                holdout: 0.1,
            },
            mpc: MpcSection {
                horizon: 10,
                w_x: 1.0,
                w_u: 0.05,
                w_du: 0.0,
                rho: 100.0,
                u_ref: 0.0,
            },
            solver: SolverSection {
                epsilon: 1e-6,
                backend: Backend::Auto,
            },
            simulation: SimulationSection {
                duration: 50.0,
                reference_amplitude: reference.amplitude,
                reference_omega: reference.omega,
                preview: true,
            },
        }
    }
}

impl ExperimentConfig {
    /// Reads `path`, or returns the built-in defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| SchemaError(format!("config {}: {e}", path.display())).into())
    }

    pub fn kdv(&self) -> KdvConfig {
        KdvConfig {
            half_length: self.plant.half_length,
            n_grid: self.plant.n_grid,
            dt: self.plant.dt,
            profile_centers: self.plant.profile_centers.clone(),
            profile_width: self.plant.profile_width,
        }
    }

    pub fn nmpc_spec(&self) -> NmpcSpec {
        let (n_x, n_u) = (self.plant.n_grid, self.plant.profile_centers.len());
        let mut spec = NmpcSpec::uniform(
            self.mpc.horizon,
            n_x,
            n_u,
            self.mpc.w_x,
            self.mpc.w_u,
            self.mpc.w_du,
            self.mpc.rho,
        );
        spec.u_r = DVector::from_element(n_u, self.mpc.u_ref);
        spec
    }

    pub fn reference(&self) -> SinusoidalReference {
        SinusoidalReference {
            amplitude: self.simulation.reference_amplitude,
            omega: self.simulation.reference_omega,
        }
    }

    pub fn closed_loop_options(&self) -> ClosedLoopOptions {
        ClosedLoopOptions {
            duration: self.simulation.duration,
            epsilon: self.solver.epsilon,
            backend: self.solver.backend,
            preview: self.simulation.preview,
        }
    }
}
