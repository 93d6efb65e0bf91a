use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::certificate::certified_iteration_bound;
use super::iterate::{initial_point, neighborhood_residual, IpmIterate};
use super::newton::{Backend, Direction, NewtonSystem};
use super::problem::{BoxQpProblem, HessianForm};
use super::SolverError;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Termination threshold on `vᵀs` of the λ-scaled problem.
    pub epsilon: f64,
    pub backend: Backend,
    /// One step of iterative refinement after each dense solve.
    pub refine: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            backend: Backend::Auto,
            refine: false,
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub alpha: f64,
    pub predictor_curvature: f64,
    pub corrector_curvature: f64,
    /// Neighborhood residual of the accepted (post-corrector) iterate.
    pub neighborhood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub z_star: Vec<f64>,
    pub iterations: usize,
    pub certified_bound: usize,
    pub converged: bool,
    pub final_gap: f64,
    /// `μ⁰, μ¹, …, μᴷ`.
    pub mu_trace: Vec<f64>,
    /// `μ^{k+1}/μ^k` for every performed iteration.
    pub per_iteration_contraction: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    /// Seconds; informational.
    pub wall_time: f64,
}

/// State handed to an observer after each accepted iterate.
pub struct IterationEvent<'e> {
    pub k: usize,
    pub iterate: &'e IpmIterate,
    pub predictor: &'e Direction,
    pub corrector: &'e Direction,
    pub record: &'e IterationRecord,
}

/// Adaptive predictor step `min(1/2, √(μ / (8‖Δv⊙Δs − Δμ_p·1‖₂)))`.
pub fn predictor_step_size(mu: f64, dv: &DVector<f64>, ds: &DVector<f64>) -> f64 {
    let m = dv.len();
    let dmu = dv.dot(ds) / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        let e = dv[i] * ds[i] - dmu;
        acc += e * e;
    }
    let norm = acc.sqrt();
    if norm == 0.0 {
        0.5
    } else {
        (mu / (8.0 * norm)).sqrt().min(0.5)
    }
}

fn predictor_step(mu: f64, d: &Direction) -> f64 {
    predictor_step_size(mu, &d.dv(), &d.ds())
}

/// Reusable solver for a fixed Hessian; the linear term varies per call.
pub struct BoxQpSolver<'a> {
    n: usize,
    options: SolverOptions,
    certified_bound: usize,
    system: NewtonSystem<'a>,
}

impl<'a> BoxQpSolver<'a> {
    /// Validates the Hessian (including positive definiteness) and allocates
    /// the Newton workspace.
    pub fn new(hessian: &'a HessianForm, options: SolverOptions) -> Result<Self, SolverError> {
        hessian.validate()?;
        Self::prevalidated(hessian, options)
    }

    pub(crate) fn prevalidated(
        hessian: &'a HessianForm,
        options: SolverOptions,
    ) -> Result<Self, SolverError> {
        let n = hessian.dim();
        let certified_bound = certified_iteration_bound(n, options.epsilon)?;
        let system = NewtonSystem::new(hessian, options.backend, options.refine)?;
        Ok(Self {
            n,
            options,
            certified_bound,
            system,
        })
    }

    pub fn certified_bound(&self) -> usize {
        self.certified_bound
    }

    /// Factors the reduced Newton matrix at `it` and discards the result;
    /// exposed for timing the backends against each other.
    pub fn factor_at(&mut self, it: &IpmIterate) -> Result<(), SolverError> {
        if it.n() != self.n {
            return Err(SolverError::Dimension(format!(
                "iterate has dimension {}, hessian {}",
                it.n(),
                self.n
            )));
        }
        self.system.factor(it)
    }

    pub fn solve(&mut self, h: &DVector<f64>) -> Result<SolveReport, SolverError> {
        self.solve_observed(h, |_| {})
    }

    /// Runs the certified predictor-corrector iteration.
    ///
    /// Each iteration factors the reduced Newton matrix twice: at the current
    /// iterate for the predictor and at the intermediate point for the
    /// corrector.
    pub fn solve_observed<F>(
        &mut self,
        h: &DVector<f64>,
        mut observer: F,
    ) -> Result<SolveReport, SolverError>
    where
        F: FnMut(&IterationEvent<'_>),
    {
        if h.len() != self.n {
            return Err(SolverError::Dimension(format!(
                "linear term has length {}, hessian dimension is {}",
                h.len(),
                self.n
            )));
        }
        let start = Instant::now();
        let eps = self.options.epsilon;
        let n_max = self.certified_bound;

        let Some(mut it) = initial_point(h) else {
            return Ok(SolveReport {
                z_star: vec![0.0; self.n],
                iterations: 0,
                certified_bound: n_max,
                converged: true,
                final_gap: 0.0,
                mu_trace: Vec::new(),
                per_iteration_contraction: Vec::new(),
                trace: Vec::new(),
                wall_time: start.elapsed().as_secs_f64(),
            });
        };

        let mut mu_trace = vec![it.mu];
        let mut contraction = Vec::new();
        let mut trace = Vec::new();
        let mut iterations = 0;
        while iterations < n_max {
            if it.gap() <= eps {
                break;
            }
            let k = iterations;
            let mu = it.mu;

            self.system
                .factor(&it)
                .map_err(|_| SolverError::NumericalBreakdown { iteration: k, stage: "predictor" })?;
            let pred = self.system.direction(&it, 0.0, mu);
            let alpha = predictor_step(mu, &pred);
            it.step(alpha, &pred);
            check_positive(&it, k, "predictor")?;

            let mu_hat = it.mu;
            self.system
                .factor(&it)
                .map_err(|_| SolverError::NumericalBreakdown { iteration: k, stage: "corrector" })?;
            let corr = self.system.direction(&it, 1.0, mu_hat);
            it.step(1.0, &corr);
            check_positive(&it, k, "corrector")?;

            let record = IterationRecord {
                alpha,
                predictor_curvature: pred.curvature(),
                corrector_curvature: corr.curvature(),
                neighborhood: neighborhood_residual(&it),
            };
            observer(&IterationEvent {
                k,
                iterate: &it,
                predictor: &pred,
                corrector: &corr,
                record: &record,
            });
            contraction.push(it.mu / mu);
            mu_trace.push(it.mu);
            trace.push(record);
            iterations += 1;
        }
        let final_gap = it.gap();
        if iterations == n_max && final_gap > eps {
            log::warn!(
                "certified bound of {n_max} iterations exhausted with gap {final_gap:e} > {eps:e}"
            );
        }
        Ok(SolveReport {
            z_star: it.z.iter().copied().collect(),
            iterations,
            certified_bound: n_max,
            converged: final_gap <= eps,
            final_gap,
            mu_trace,
            per_iteration_contraction: contraction,
            trace,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

fn check_positive(it: &IpmIterate, iteration: usize, stage: &'static str) -> Result<(), SolverError> {
    if it.is_strictly_positive() && it.mu.is_finite() {
        Ok(())
    } else {
        Err(SolverError::NumericalBreakdown { iteration, stage })
    }
}

/// Solves `problem` from the cold start with default backend selection.
pub fn solve(problem: &BoxQpProblem, epsilon: f64) -> Result<SolveReport, SolverError> {
    solve_with(
        problem,
        SolverOptions {
            epsilon,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_with(problem: &BoxQpProblem, options: SolverOptions) -> Result<SolveReport, SolverError> {
    // BoxQpProblem::new already validated the hessian.
    BoxQpSolver::prevalidated(problem.hessian(), options)?.solve(problem.h())
}

impl HessianForm {
    /// Convenience for building a solver bound to this Hessian.
    pub fn solver(&self, options: SolverOptions) -> Result<BoxQpSolver<'_>, SolverError> {
        BoxQpSolver::new(self, options)
    }
}
