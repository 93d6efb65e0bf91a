//! Test-only instance generators and independent oracles.
#![allow(dead_code)]

use koopman_boxqp::boxqp::{BoxQpProblem, HessianForm, KoopmanHessian};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    // Sum of uniforms is close enough to Gaussian for instance generation.
    DMatrix::from_fn(r, c, |_, _| {
        (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * 0.866
    })
}

/// Random strictly convex dense BoxQP; `h` is scaled so that typically a
/// mix of bounds is active.
pub fn random_dense(rng: &mut ChaCha8Rng, n: usize) -> BoxQpProblem {
    let m = normal_matrix(rng, n, n);
    let mut h_mat = m.tr_mul(&m) / n as f64;
    for i in 0..n {
        h_mat[(i, i)] += 0.1;
    }
    let h_mat = (&h_mat + h_mat.transpose()) * 0.5;
    let scale = rng.gen_range(0.5..3.0);
    let h = normal_matrix(rng, n, 1).column(0) * scale;
    BoxQpProblem::new(HessianForm::Dense(h_mat), h.into_owned()).unwrap()
}

/// Random block lower-triangular F with `N` blocks of `n_x × n_u`.
pub fn random_koopman(
    rng: &mut ChaCha8Rng,
    horizon: usize,
    nu: usize,
    nx: usize,
) -> BoxQpProblem {
    let mut f = DMatrix::zeros(horizon * nx, horizon * nu);
    for i in 0..horizon {
        for j in 0..=i {
            let block = normal_matrix(rng, nx, nu) * (0.3 / (1.0 + (i - j) as f64));
            f.view_mut((i * nx, j * nu), (nx, nu)).copy_from(&block);
        }
    }
    let m = normal_matrix(rng, horizon * nu, horizon * nu) * 0.2;
    let mut input_block = m.tr_mul(&m);
    for i in 0..horizon * nu {
        input_block[(i, i)] += rng.gen_range(0.05..0.5);
    }
    let input_block = (&input_block + input_block.transpose()) * 0.5;
    let state_diag = DVector::from_fn(horizon * nx, |_, _| rng.gen_range(0.5..2.0));
    let rho = 10f64.powf(rng.gen_range(0.0..2.5));
    let k = KoopmanHessian {
        f,
        input_block,
        state_diag,
        rho,
    };
    let n = horizon * (nu + nx);
    let h = normal_matrix(rng, n, 1).column(0) * rng.gen_range(0.5..3.0);
    BoxQpProblem::new(HessianForm::KoopmanStructured(k), h.into_owned()).unwrap()
}

/// Unique minimizer of a strictly convex BoxQP by enumerating bound-activity
/// patterns (lower, free, upper per coordinate) until one satisfies the KKT
/// conditions.
pub fn active_set_oracle(h_mat: &DMatrix<f64>, h: &DVector<f64>) -> DVector<f64> {
    let n = h.len();
    let total = 3usize.pow(n as u32);
    let tol = 1e-9;
    for code in 0..total {
        let mut pattern = vec![0i8; n];
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = (c % 3) as i8 - 1;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
        let mut z = DVector::from_fn(n, |i, _| pattern[i] as f64);
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h_mat[(free[a], free[b])]);
            let g = h_mat * &z + h;
            let rhs = DVector::from_fn(free.len(), |a, _| -g[free[a]]);
            let sol = match hff.cholesky() {
                Some(c) => c.solve(&rhs),
                None => continue,
            };
            for (a, &i) in free.iter().enumerate() {
                z[i] = sol[a];
            }
        }
        let grad = h_mat * &z + h;
        let ok = (0..n).all(|i| match pattern[i] {
            0 => z[i] >= -1.0 - tol && z[i] <= 1.0 + tol,
            -1 => grad[i] >= -tol,
            _ => grad[i] <= tol,
        });
        if ok {
            return z;
        }
    }
    panic!("no KKT point found; hessian not positive definite?");
}

/// Solves the full `5n` Newton system in (Δz, Δγ, Δθ, Δφ, Δψ) by dense LU.
pub fn full_newton_oracle(
    h_mat: &DMatrix<f64>,
    lambda: f64,
    gamma: &DVector<f64>,
    theta: &DVector<f64>,
    phi: &DVector<f64>,
    psi: &DVector<f64>,
    sigma: f64,
    mu: f64,
) -> DVector<f64> {
    let n = gamma.len();
    let mut k = DMatrix::zeros(5 * n, 5 * n);
    let mut rhs = DVector::zeros(5 * n);
    // rows 0..n: 2λHΔz + Δγ − Δθ = 0
    k.view_mut((0, 0), (n, n)).copy_from(&(h_mat * (2.0 * lambda)));
    for i in 0..n {
        k[(i, n + i)] = 1.0;
        k[(i, 2 * n + i)] = -1.0;
        // Δz + Δφ = 0
        k[(n + i, i)] = 1.0;
        k[(n + i, 3 * n + i)] = 1.0;
        // −Δz + Δψ = 0
        k[(2 * n + i, i)] = -1.0;
        k[(2 * n + i, 4 * n + i)] = 1.0;
        // φΔγ + γΔφ = σμ − γφ
        k[(3 * n + i, n + i)] = phi[i];
        k[(3 * n + i, 3 * n + i)] = gamma[i];
        rhs[3 * n + i] = sigma * mu - gamma[i] * phi[i];
        // ψΔθ + θΔψ = σμ − θψ
        k[(4 * n + i, 2 * n + i)] = psi[i];
        k[(4 * n + i, 4 * n + i)] = theta[i];
        rhs[4 * n + i] = sigma * mu - theta[i] * psi[i];
    }
    k.lu().solve(&rhs).expect("full newton system singular")
}

pub fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
