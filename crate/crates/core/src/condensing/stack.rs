use nalgebra::{DMatrix, DVector};

use crate::koopman::KoopmanModel;

/// Condensed prediction `col(x₁, …, x_N) = E·ψ₀ + F·col(u₀, …, u_{N−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStack {
    pub horizon: usize,
    pub n_x: usize,
    pub n_u: usize,
    /// `(N·n_x) × n_ψ`, block `k` is `C·A^{k+1}`.
    pub e: DMatrix<f64>,
    /// `(N·n_x) × (N·n_u)`, block `(i, j)` is `C·A^{i−j}·B` for `i ≥ j`.
    pub f: DMatrix<f64>,
}

impl PredictionStack {
    pub fn predict(&self, psi0: &DVector<f64>, inputs: &DVector<f64>) -> DVector<f64> {
        &self.e * psi0 + &self.f * inputs
    }
}

/// Builds `E` and `F` by repeated multiplication with `A`.
pub fn build_prediction_stack(model: &KoopmanModel, horizon: usize) -> PredictionStack {
    assert!(horizon >= 1, "horizon must be at least 1");
    let nx = model.n_x();
    let nu = model.n_u();
    let n_psi = model.n_psi();
    let mut e = DMatrix::zeros(horizon * nx, n_psi);
    let mut f = DMatrix::zeros(horizon * nx, horizon * nu);
    // C·A^d for d = 0..=N
    let mut ca = model.c();
    let mut markov = Vec::with_capacity(horizon);
    for k in 0..horizon {
        markov.push(&ca * &model.b);
        ca = &ca * &model.a;
        e.view_mut((k * nx, 0), (nx, n_psi)).copy_from(&ca);
    }
    for i in 0..horizon {
        for j in 0..=i {
            f.view_mut((i * nx, j * nu), (nx, nu)).copy_from(&markov[i - j]);
        }
    }
    PredictionStack {
        horizon,
        n_x: nx,
        n_u: nu,
        e,
        f,
    }
}

/// Matrix of `Σ_{k=0}^{N−1} ‖u_k − u_{k−1}‖²_{W_Δu}` with `u_{−1} = 0`.
///
/// Block tridiagonal: diagonal `2W` except `W` in the last block, off-diagonal `−W`.
pub fn build_rbar(w_du: &DVector<f64>, horizon: usize) -> DMatrix<f64> {
    let nu = w_du.len();
    let mut r = DMatrix::zeros(horizon * nu, horizon * nu);
    for k in 0..horizon {
        let diag = if k + 1 < horizon { 2.0 } else { 1.0 };
        for i in 0..nu {
            let a = k * nu + i;
            r[(a, a)] = diag * w_du[i];
            if k + 1 < horizon {
                let b = a + nu;
                r[(a, b)] = -w_du[i];
                r[(b, a)] = -w_du[i];
            }
        }
    }
    r
}
