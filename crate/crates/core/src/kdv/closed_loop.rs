use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{KdvConfig, KdvError, KdvStepper};
use crate::boxqp::{Backend, SolverOptions, DEFAULT_EPSILON};
use crate::condensing::{build_prediction_stack, KoopmanBoxQp, NmpcSpec};
use crate::koopman::KoopmanModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopOptions {
    /// Simulated time in seconds; the sampling time is the plant `dt`.
    pub duration: f64,
    pub epsilon: f64,
    pub backend: Backend,
    /// Feed the reference over the horizon, `x_r(t + k·dt)` for `k = 1..N`,
    /// instead of holding `x_r(t)`.
    pub preview: bool,
}

impl Default for ClosedLoopOptions {
    fn default() -> Self {
        Self {
            duration: 50.0,
            epsilon: DEFAULT_EPSILON,
            backend: Backend::Auto,
            preview: true,
        }
    }
}

/// Closed-loop record. `states`, `times` and `references` have one more row
/// than `inputs` and the per-solve vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub references: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub final_gaps: Vec<f64>,
    pub solve_times: Vec<f64>,
    /// Smallest `ΔvᵀΔs` over all Newton directions of each solve
    /// (`+∞` when the solve needed no iterations).
    pub min_curvature: Vec<f64>,
    pub certified_bound: usize,
}

impl TrajectoryLog {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            return 0.0;
        }
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    /// `δ = max(0, max|y| − 1)` over all logged states.
    pub fn state_violation(&self) -> f64 {
        let peak = self
            .states
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        (peak - 1.0).max(0.0)
    }

    pub fn max_abs_input(&self) -> f64 {
        self.inputs.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square tracking error of the spatial mean over the run.
    pub fn mean_tracking_rms(&self) -> f64 {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let sq: f64 = self
            .states
            .iter()
            .zip(&self.references)
            .map(|(y, r)| (mean(y) - mean(r)).powi(2))
            .sum();
        (sq / self.states.len() as f64).sqrt()
    }

    pub fn write_states_csv<W: Write>(&self, w: W) -> Result<(), KdvError> {
        write_rows(w, "y", &self.times, &self.states)
    }

    pub fn write_inputs_csv<W: Write>(&self, w: W) -> Result<(), KdvError> {
        write_rows(w, "u", &self.times[..self.inputs.len()], &self.inputs)
    }

    pub fn write_references_csv<W: Write>(&self, w: W) -> Result<(), KdvError> {
        write_rows(w, "r", &self.times, &self.references)
    }

    pub fn write_iterations_csv<W: Write>(&self, w: W) -> Result<(), KdvError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "iterations", "converged", "final_gap", "solve_time"])?;
        for k in 0..self.iterations.len() {
            out.write_record([
                format!("{:e}", self.times[k]),
                self.iterations[k].to_string(),
                self.converged[k].to_string(),
                format!("{:e}", self.final_gaps[k]),
                format!("{:e}", self.solve_times[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn write_rows<W: Write>(w: W, prefix: &str, times: &[f64], rows: &[Vec<f64>]) -> Result<(), KdvError> {
    let mut out = csv::Writer::from_writer(w);
    let width = rows.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..width).map(|i| format!("{prefix}{i}")));
    out.write_record(&header)?;
    for (t, row) in times.iter().zip(rows) {
        let mut rec = vec![format!("{t:e}")];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Koopman-MPC in closed loop with the KdV plant.
///
/// At every sampling instant the current state is lifted, the linear term of
/// the relaxed BoxQP is rebuilt in place, the QP is solved and the first
/// input block is applied for one plant step. Non-converged solves (iteration
/// certificate exhausted) are logged, not fatal; numerical breakdown is.
pub fn closed_loop<R>(
    cfg: &KdvConfig,
    model: &KoopmanModel,
    spec: &NmpcSpec,
    reference: R,
    y0: &DVector<f64>,
    options: &ClosedLoopOptions,
) -> Result<TrajectoryLog, KdvError>
where
    R: Fn(f64) -> DVector<f64>,
{
    cfg.validate()?;
    let n = cfg.n_grid;
    let nu = cfg.n_inputs();
    if model.n_x() != n || model.n_u() != nu || spec.n_x != n || spec.n_u != nu || y0.len() != n {
        return Err(KdvError::Dimension(format!(
            "plant has {n} states and {nu} inputs; model ({}, {}), spec ({}, {}), y0 {}",
            model.n_x(),
            model.n_u(),
            spec.n_x,
            spec.n_u,
            y0.len()
        )));
    }
    let horizon = spec.horizon;
    let stack = build_prediction_stack(model, horizon);
    let mut qp = KoopmanBoxQp::new(spec, &stack)?;
    // The solver borrows the Hessian for the whole run while the linear term
    // of `qp` is rewritten every instant.
    let hessian = qp.hessian.clone();
    let mut solver = hessian
        .solver(SolverOptions {
            epsilon: options.epsilon,
            backend: options.backend,
            refine: false,
        })
        .map_err(|source| KdvError::Solver { instant: 0, source })?;
    let certified_bound = solver.certified_bound();
    let mut plant = KdvStepper::new(cfg)?;

    let steps = (options.duration / cfg.dt).round() as usize;
    let dt = cfg.dt;
    let mut y: Vec<f64> = y0.iter().copied().collect();
    let mut psi = DVector::zeros(model.n_psi());
    let mut h = DVector::zeros(qp.dim());
    let mut x_bar = DVector::zeros(horizon * n);
    let u_bar = DVector::from_fn(horizon * nu, |i, _| spec.u_r[i % nu]);

    let mut log = TrajectoryLog {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps),
        references: Vec::with_capacity(steps + 1),
        iterations: Vec::with_capacity(steps),
        converged: Vec::with_capacity(steps),
        final_gaps: Vec::with_capacity(steps),
        solve_times: Vec::with_capacity(steps),
        min_curvature: Vec::with_capacity(steps),
        certified_bound,
    };

    for k in 0..=steps {
        let t = k as f64 * dt;
        log.times.push(t);
        log.states.push(y.clone());
        log.references.push(reference(t).iter().copied().collect());
        if k == steps {
            break;
        }

        if options.preview {
            for j in 0..horizon {
                let r = reference(t + (j + 1) as f64 * dt);
                x_bar.rows_mut(j * n, n).copy_from(&r);
            }
        } else {
            let r = reference(t);
            for j in 0..horizon {
                x_bar.rows_mut(j * n, n).copy_from(&r);
            }
        }
        qp.set_reference_stack(&x_bar, &u_bar);
        model.lift.lift_into(&y, psi.as_mut_slice());
        qp.h_into(&psi, &mut h);

        let started = Instant::now();
        let report = solver
            .solve(&h)
            .map_err(|source| KdvError::Solver { instant: k, source })?;
        log.solve_times.push(started.elapsed().as_secs_f64());
        if !report.converged {
            log::warn!("instant {k}: certificate exhausted with gap {:e}", report.final_gap);
        }
        let u0 = report.z_star[..nu].to_vec();
        plant.step(&mut y, &u0).map_err(|e| match e {
            KdvError::BlowUp { .. } => KdvError::BlowUp { step: k },
            other => other,
        })?;
        log.inputs.push(u0);
        log.iterations.push(report.iterations);
        log.converged.push(report.converged);
        log.final_gaps.push(report.final_gap);
        log.min_curvature.push(
            report
                .trace
                .iter()
                .flat_map(|r| [r.predictor_curvature, r.corrector_curvature])
                .fold(f64::INFINITY, f64::min),
        );
    }
    Ok(log)
}
