//! Acceptance criteria 1–9, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the report is always printed.
//! Set `KBQP_ACCEPTANCE_FULL=1` to run criterion 8 with the full 1000-trajectory
//! dataset instead of 200.

mod common;

use std::cell::Cell;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use koopman_boxqp::boxqp::*;
use koopman_boxqp::condensing::NmpcSpec;
use koopman_boxqp::kdv::*;
use koopman_boxqp::koopman::{fit_with_holdout, sample_rbf_centers, LiftSpec, DEFAULT_CENTER_SEED, DEFAULT_RIDGE};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const CURVATURE_TOL: f64 = -1e-12;

/// Most negative ΔvᵀΔs seen by any criterion that runs the solver.
struct Curvature(Cell<f64>);

impl Curvature {
    fn see(&self, c: f64) {
        self.0.set(self.0.get().min(c));
    }
    fn see_event(&self, ev: &IterationEvent<'_>) {
        self.see(ev.predictor.curvature());
        self.see(ev.corrector.curvature());
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let bound = certified_iteration_bound(1040, 1e-6).unwrap();
    outcome(bound == 2079, format!("N_max(1040, 1e-6) = {bound}, expected 2079 (exact)"))
}

fn criterion_2() -> Outcome {
    let mut r = rng(2002);
    let mut worst_mu: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut count = 0;
    for &n in &[1usize, 4, 64, 1040] {
        let mut p = BoxQpProblem::new(HessianForm::Dense(DMatrix::identity(n, n)), DVector::from_element(n, 1.0)).unwrap();
        for _ in 0..250 {
            let scale = 10f64.powf(r.gen_range(-3.0..3.0));
            let h = normal_matrix(&mut r, n, 1).column(0) * scale;
            p.set_h(h.into_owned()).unwrap();
            let it = initialize(&p).unwrap();
            worst_mu = worst_mu.max((it.mu - 1.0).abs());
            worst_res = worst_res.max((neighborhood_residual(&it) - 0.25).abs());
            count += 1;
        }
    }
    outcome(
        worst_mu <= 1e-12 && worst_res <= 1e-12,
        format!("{count} starts: max |mu-1| = {worst_mu:.1e}, max |residual-0.25| = {worst_res:.1e} (tol 1e-12)"),
    )
}

fn criterion_3(curv: &Curvature) -> Outcome {
    let mut r = rng(3003);
    let mut violations = 0;
    let mut iterations = 0;
    let mut worst_ratio: f64 = 0.0;
    for &n in &[2usize, 8, 32, 128] {
        let factor = contraction_factor(n);
        for _ in 0..125 {
            let p = random_dense(&mut r, n);
            let mut solver = p.hessian().solver(SolverOptions::default()).unwrap();
            let mut prev = 1.0;
            solver
                .solve_observed(p.h(), |ev| {
                    let mu = ev.iterate.mu;
                    if mu > factor * prev + 1e-12 {
                        violations += 1;
                    }
                    worst_ratio = worst_ratio.max(mu / prev / factor);
                    curv.see_event(ev);
                    prev = mu;
                    iterations += 1;
                })
                .unwrap();
        }
    }
    outcome(
        violations == 0,
        format!(
            "500 QPs, {iterations} iterations, {violations} violations of mu+ <= (1-0.2348/sqrt(2n))^2 mu + 1e-12; worst ratio to bound {worst_ratio:.3}"
        ),
    )
}

fn criterion_4(curv: &Curvature) -> Outcome {
    let mut r = rng(4004);
    let mut worst: f64 = 0.0;
    let mut worst_loose: f64 = 0.0;
    for i in 0..200 {
        let n = 1 + i % 10;
        let p = random_dense(&mut r, n);
        let oracle = active_set_oracle(&p.hessian().to_dense(), p.h());
        let mut solver = p
            .hessian()
            .solver(SolverOptions { epsilon: 1e-9, ..Default::default() })
            .unwrap();
        let rep = solver.solve_observed(p.h(), |ev| curv.see_event(ev)).unwrap();
        worst = worst.max((DVector::from_vec(rep.z_star) - &oracle).amax());
        let loose = solve(&p, 1e-6).unwrap();
        worst_loose = worst_loose.max((DVector::from_vec(loose.z_star) - &oracle).amax());
    }
    outcome(
        worst <= 1e-5,
        format!(
            "200 QPs n<=10 vs 3^n enumeration: max coord error {worst:.1e} at eps=1e-9 (tol 1e-5); for reference {worst_loose:.1e} at eps=1e-6"
        ),
    )
}

fn criterion_5(curv: &Curvature) -> Outcome {
    let mut r = rng(5005);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    let mut largest = 0;
    for i in 0..50 {
        let (horizon, nu, nx) = if i < 3 {
            (10, 4, 100)
        } else {
            (r.gen_range(1..=10), r.gen_range(1..=4), r.gen_range(1..=100))
        };
        let p = random_koopman(&mut r, horizon, nu, nx);
        largest = largest.max(p.n());
        let run = |backend| {
            let mut s = p.hessian().solver(SolverOptions { backend, ..Default::default() }).unwrap();
            s.solve_observed(p.h(), |ev| curv.see_event(ev)).unwrap()
        };
        let s = run(Backend::Structured);
        let d = run(Backend::Dense);
        if s.iterations != d.iterations {
            mismatched += 1;
        }
        worst = worst.max(rel_diff(&DVector::from_vec(s.z_star), &DVector::from_vec(d.z_star)));
    }
    outcome(
        mismatched == 0 && worst <= 1e-7,
        format!(
            "50 instances (largest n = {largest}): max relative z* difference {worst:.1e} (tol 1e-7), {mismatched} iteration-count mismatches (tol 0)"
        ),
    )
}

fn criterion_6(curv: &Curvature) -> Outcome {
    let c = curv.0.get();
    outcome(
        c >= CURVATURE_TOL,
        format!("min dv'ds over every Newton direction of criteria 3, 4, 5, 8: {c:.2e} (tol >= -1e-12)"),
    )
}

fn soliton_error(dt: f64) -> f64 {
    let cfg = KdvConfig { half_length: 8.0 * PI, n_grid: 512, dt, ..Default::default() };
    let mut y: Vec<f64> = soliton(&cfg, 0.5, -2.0, 0.0).iter().copied().collect();
    let mut s = KdvStepper::new(&cfg).unwrap();
    let steps = (1.0 / dt).round() as usize;
    for _ in 0..steps {
        s.step(&mut y, &[0.0; 4]).unwrap();
    }
    (DVector::from_vec(y) - soliton(&cfg, 0.5, -2.0, 1.0)).amax()
}

fn criterion_7() -> Outcome {
    let e1 = soliton_error(0.01);
    let e2 = soliton_error(0.005);
    let order = (e1 / e2).log2();

    let cfg = KdvConfig::default();
    let mut y: Vec<f64> = cfg.combine_profiles(&[0.8, -0.5, 0.3, 0.9]).iter().copied().collect();
    let mean = |y: &[f64]| y.iter().sum::<f64>() / y.len() as f64;
    let m0 = mean(&y);
    let mut s = KdvStepper::new(&cfg).unwrap();
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        s.step(&mut y, &[0.0; 4]).unwrap();
        drift = drift.max((mean(&y) - m0).abs());
    }
    outcome(
        e1 < 1e-3 && order >= 1.9 && drift < 1e-8,
        format!(
            "soliton k=0.5 Linf error {e1:.2e} after 100 steps (tol 1e-3), order {order:.2} (tol >= 1.9); mass drift {drift:.1e} over 1000 steps (tol 1e-8)"
        ),
    )
}

fn criterion_8(curv: &Curvature) -> Outcome {
    let full = std::env::var("KBQP_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let n_traj = if full { 1000 } else { 200 };
    let cfg = KdvConfig::default();
    let t0 = Instant::now();
    let (data, stats) = generate_dataset(&cfg, n_traj, 200, 1).unwrap();
    let centers = sample_rbf_centers(200, &vec![(-1.0, 1.0); 100], DEFAULT_CENTER_SEED);
    let lift = LiftSpec::new(100, centers);
    let (model, fit) = fit_with_holdout(&data, &lift, DEFAULT_RIDGE, 0.1).unwrap();
    let spec = NmpcSpec::uniform(10, 100, 4, 1.0, 0.05, 0.0, 100.0);
    let reference = SinusoidalReference::default();
    let opts = ClosedLoopOptions { duration: 50.0, ..Default::default() };
    let log = closed_loop(&cfg, &model, &spec, |t| reference.at(t, 100), &DVector::zeros(100), &opts).unwrap();
    for &c in &log.min_curvature {
        curv.see(c);
    }
    let n = spec.n_decision();
    let max_it = log.max_iterations();
    let gap = log.final_gaps.iter().copied().fold(0.0, f64::max);
    let pass = n == 1040
        && log.all_converged()
        && gap <= 1e-6
        && max_it <= log.certified_bound
        && log.certified_bound == 2079
        && log.max_abs_input() <= 1.0
        && max_it <= 150;
    outcome(
        pass,
        format!(
            "{n_traj} trajectories ({} rows, {} discarded), n_psi {}, holdout rms {:.2e} vs persistence {:.2e}; {} solves of n = {n}: mean {:.1} / max {max_it} iterations (gate 150, certificate {}), max gap {gap:.1e} (tol 1e-6), max|u| {:.3} (tol 1), state violation delta {:.3}, tracking rms {:.3}, {:.0} s",
            stats.rows,
            stats.discarded,
            model.n_psi(),
            fit.holdout_rms,
            fit.holdout_persistence_rms,
            log.steps(),
            log.mean_iterations(),
            log.certified_bound,
            log.max_abs_input(),
            log.state_violation(),
            log.mean_tracking_rms(),
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn median_factor_time(p: &BoxQpProblem, backend: Backend, reps: usize) -> Duration {
    let it = initialize(p).unwrap();
    let mut s = p.hessian().solver(SolverOptions { backend, ..Default::default() }).unwrap();
    s.factor_at(&it).unwrap();
    let mut times: Vec<Duration> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            s.factor_at(&it).unwrap();
            t.elapsed()
        })
        .collect();
    times.sort();
    times[reps / 2]
}

fn criterion_9() -> Outcome {
    let mut r = rng(9009);
    let p = random_koopman(&mut r, 10, 4, 100);
    let dense = median_factor_time(&p, Backend::Dense, 15);
    let structured = median_factor_time(&p, Backend::Structured, 15);
    let speedup = dense.as_secs_f64() / structured.as_secs_f64();
    outcome(
        speedup >= 3.0,
        format!(
            "KdV shape N=10, n_u=4, n_x=100: median factorization dense {:.2} ms, structured {:.3} ms, speedup {speedup:.1}x (gate >= 3x, ordering only)",
            dense.as_secs_f64() * 1e3,
            structured.as_secs_f64() * 1e3
        ),
    )
}

fn run(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let curv = Curvature(Cell::new(f64::INFINITY));
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut timed = |k: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = run(f);
        results.push((k, o, t.elapsed().as_secs_f64()));
    };
    timed(1, &mut criterion_1);
    timed(2, &mut criterion_2);
    timed(3, &mut || criterion_3(&curv));
    timed(4, &mut || criterion_4(&curv));
    timed(5, &mut || criterion_5(&curv));
    timed(7, &mut criterion_7);
    timed(8, &mut || criterion_8(&curv));
    timed(9, &mut criterion_9);
    timed(6, &mut || criterion_6(&curv));
    results.sort_by_key(|r| r.0);

    println!("acceptance criteria");
    let mut failed = 0;
    for (k, o, secs) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k}: {tag} [{secs:.1}s] {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
