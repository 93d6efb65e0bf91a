mod common;

use common::*;
use koopman_boxqp::boxqp::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn assert_full_system(problem: &BoxQpProblem, it: &IpmIterate, d: &Direction, sigma: f64, mu: f64) {
    let h = problem.hessian().to_dense();
    let oracle = full_newton_oracle(&h, it.lambda, &it.gamma, &it.theta, &it.phi, &it.psi, sigma, mu);
    let n = it.n();
    let ours = DVector::from_iterator(
        5 * n,
        d.dz
            .iter()
            .chain(d.dgamma.iter())
            .chain(d.dtheta.iter())
            .chain(d.dphi.iter())
            .chain(d.dpsi.iter())
            .copied(),
    );
    assert!(rel_diff(&ours, &oracle) < 1e-10, "rel diff {}", rel_diff(&ours, &oracle));
}

#[test]
fn scalar_newton_matches_full_system() {
    let p = BoxQpProblem::new(
        HessianForm::Dense(DMatrix::from_element(1, 1, 1.0)),
        DVector::from_element(1, 2.5),
    )
    .unwrap();
    let it = initialize(&p).unwrap();
    for sigma in [0.0, 1.0] {
        let d = newton_direction(&it, &p, sigma, it.mu).unwrap();
        // scalar reduced system: Δz = rhs / (2λ + γ/φ + θ/ψ)
        let denom = 2.0 * it.lambda + it.gamma[0] / it.phi[0] + it.theta[0] / it.psi[0];
        let rhs = it.gamma[0] - it.theta[0] - sigma * it.mu * (1.0 / it.phi[0] - 1.0 / it.psi[0]);
        assert!((d.dz[0] - rhs / denom).abs() < 1e-15);
        assert_full_system(&p, &it, &d, sigma, it.mu);
    }
}

#[test]
fn random_newton_directions_match_full_system() {
    let mut r = rng(11);
    for _ in 0..40 {
        let n = r.gen_range(1..12);
        let p = random_dense(&mut r, n);
        // walk a few iterations so the test covers off-start iterates too
        let mut seen = 0;
        let mut sys = p.hessian().solver(SolverOptions::default()).unwrap();
        sys.solve_observed(p.h(), |ev| {
            if seen < 3 {
                let it = ev.iterate;
                for sigma in [0.0, 1.0] {
                    let d = newton_direction(it, &p, sigma, it.mu).unwrap();
                    assert_full_system(&p, it, &d, sigma, it.mu);
                    assert!(d.curvature() >= -1e-12);
                }
            }
            seen += 1;
        })
        .unwrap();
    }
}

#[test]
fn corrector_vanishes_on_central_path() {
    let n = 4;
    let mu = 0.3;
    let phi = DVector::from_vec(vec![0.5, 1.0, 1.5, 0.2]);
    let psi = phi.map(|p| 2.0 - p);
    let z = phi.map(|p| 1.0 - p);
    let gamma = phi.map(|p| mu / p);
    let theta = psi.map(|p| mu / p);
    // choose h so that 2λ(Hz + h) + γ − θ = 0 with H = I, λ = 1
    let h = -(&z) - (&gamma - &theta) * 0.5;
    let p = BoxQpProblem::new(HessianForm::Dense(DMatrix::identity(n, n)), h).unwrap();
    let it = IpmIterate { z, gamma, theta, phi, psi, lambda: 1.0, mu };
    assert!(neighborhood_residual(&it) < 1e-15);
    let d = newton_direction(&it, &p, 1.0, mu).unwrap();
    assert!(d.dz.amax() < 1e-14);
    assert!(d.dgamma.amax() < 1e-14 && d.dtheta.amax() < 1e-14);
}

#[test]
fn structured_direction_matches_dense_at_kdv_shape() {
    let mut r = rng(3);
    let p = random_koopman(&mut r, 10, 4, 100);
    assert_eq!(p.n(), 1040);
    let mut sys = p.hessian().solver(SolverOptions::default()).unwrap();
    let mut checked = 0;
    sys.solve_observed(p.h(), |ev| {
        if ev.k % 5 == 0 {
            let it = ev.iterate;
            for sigma in [0.0, 1.0] {
                let a = newton_direction_structured(it, &p, sigma, it.mu).unwrap();
                let b = newton_direction(it, &p, sigma, it.mu).unwrap();
                assert!(rel_diff(&a.dz, &b.dz) < 1e-8, "{}", rel_diff(&a.dz, &b.dz));
            }
            checked += 1;
        }
    })
    .unwrap();
    assert!(checked > 0);
}

#[test]
fn structured_direction_satisfies_full_system() {
    let mut r = rng(5);
    for _ in 0..10 {
        let (hz, nu, nx) = (r.gen_range(1..4), r.gen_range(1..3), r.gen_range(1..6));
        let p = random_koopman(&mut r, hz, nu, nx);
        let it = initialize(&p).unwrap();
        for sigma in [0.0, 1.0] {
            let d = newton_direction_structured(&it, &p, sigma, it.mu).unwrap();
            assert_full_system(&p, &it, &d, sigma, it.mu);
        }
    }
}

#[test]
fn matches_active_set_oracle_n8() {
    // Primal accuracy scales with ε (the gap of the λ-scaled problem); 1e-9
    // keeps every coordinate well inside 1e-5 of the oracle.
    let mut r = rng(8);
    for _ in 0..20 {
        let p = random_dense(&mut r, 8);
        let report = solve(&p, 1e-9).unwrap();
        let oracle = active_set_oracle(&p.hessian().to_dense(), p.h());
        let z = DVector::from_vec(report.z_star);
        assert!((z - &oracle).amax() < 1e-5);
    }
}

#[test]
fn predictor_step_keeps_positivity_and_corrector_restores_neighborhood() {
    let mut r = rng(10_000);
    let mut iterations = 0usize;
    for _ in 0..10_000 {
        let n = r.gen_range(1..7);
        let p = random_dense(&mut r, n);
        let report = solve(&p, 1e-6).unwrap();
        for rec in &report.trace {
            assert!(rec.alpha > 0.0 && rec.alpha <= 0.5);
            assert!(rec.neighborhood <= 0.25 + 1e-9, "{}", rec.neighborhood);
        }
        iterations += report.iterations;
    }
    assert!(iterations > 10_000);
}

#[test]
fn scaling_objective_leaves_argmin_and_iterates_unchanged() {
    let mut r = rng(21);
    for _ in 0..20 {
        let n = r.gen_range(2..15);
        let p = random_dense(&mut r, n);
        let scaled = BoxQpProblem::new(
            HessianForm::Dense(p.hessian().to_dense() * 10.0),
            p.h() * 10.0,
        )
        .unwrap();
        let a = solve(&p, 1e-6).unwrap();
        let b = solve(&scaled, 1e-6).unwrap();
        assert_eq!(a.iterations, b.iterations);
        let diff = (DVector::from_vec(a.z_star) - DVector::from_vec(b.z_star)).amax();
        assert!(diff < 1e-6);
    }
}

#[test]
fn structured_and_dense_solves_agree() {
    let mut r = rng(77);
    for _ in 0..8 {
        let (hz, nu, nx) = (r.gen_range(1..6), r.gen_range(1..4), r.gen_range(2..30));
        let p = random_koopman(&mut r, hz, nu, nx);
        let s = solve_with(&p, SolverOptions { backend: Backend::Structured, ..Default::default() }).unwrap();
        let d = solve_with(&p, SolverOptions { backend: Backend::Dense, ..Default::default() }).unwrap();
        assert_eq!(s.iterations, d.iterations);
        let zs = DVector::from_vec(s.z_star);
        let zd = DVector::from_vec(d.z_star);
        assert!(rel_diff(&zs, &zd) < 1e-7);
    }
}

#[test]
fn dense_refinement_gives_same_solution() {
    let mut r = rng(31);
    let p = random_dense(&mut r, 12);
    let a = solve_with(&p, SolverOptions::default()).unwrap();
    let b = solve_with(&p, SolverOptions { refine: true, ..Default::default() }).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert!(rel_diff(&DVector::from_vec(a.z_star), &DVector::from_vec(b.z_star)) < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iterates_stay_feasible_and_contract(seed in any::<u64>(), n in 1usize..24) {
        let mut r = rng(seed);
        let p = random_dense(&mut r, n);
        let factor = contraction_factor(n);
        let mut sys = p.hessian().solver(SolverOptions::default()).unwrap();
        let mut prev_mu = 1.0;
        let report = sys.solve_observed(p.h(), |ev| {
            let it = ev.iterate;
            assert!(it.is_strictly_positive());
            assert!(it.bound_residual() <= 1e-12);
            assert!(it.stationarity_residual(p.hessian(), p.h()) <= 1e-10);
            assert!(it.mu <= factor * prev_mu + 1e-12);
            assert!(ev.record.neighborhood <= 0.25 + 1e-9);
            assert!(ev.predictor.curvature() >= -1e-12);
            assert!(ev.corrector.curvature() >= -1e-12);
            prev_mu = it.mu;
        }).unwrap();
        prop_assert!(report.iterations <= report.certified_bound);
        prop_assert!(report.converged);
        prop_assert!(report.final_gap <= 1e-6);
        prop_assert_eq!(report.mu_trace.len(), report.iterations + 1);
        prop_assert!(report.z_star.iter().all(|z| (-1.0..=1.0).contains(z)));
    }
}
