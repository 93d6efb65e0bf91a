use nalgebra::DVector;

use super::certificate::NEIGHBORHOOD_BETA;
use super::problem::{BoxQpProblem, HessianForm};

/// Primal-dual state of the feasible interior-point method.
///
/// `gamma`/`phi` pair with the upper bound (`z + phi = 1`), `theta`/`psi`
/// with the lower bound (`z - psi = -1`). The stationarity condition is the
/// λ-scaled `2λHz + 2λh + gamma - theta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmIterate {
    pub z: DVector<f64>,
    pub gamma: DVector<f64>,
    pub theta: DVector<f64>,
    pub phi: DVector<f64>,
    pub psi: DVector<f64>,
    pub lambda: f64,
    pub mu: f64,
}

impl IpmIterate {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Complementarity `vᵀs = γᵀφ + θᵀψ`.
    pub fn gap(&self) -> f64 {
        self.gamma.dot(&self.phi) + self.theta.dot(&self.psi)
    }

    pub fn duality_measure(&self) -> f64 {
        self.gap() / (2 * self.n()) as f64
    }

    pub fn refresh_mu(&mut self) {
        self.mu = self.duality_measure();
    }

    /// `v = col(γ, θ)`.
    pub fn v(&self) -> DVector<f64> {
        stack(&self.gamma, &self.theta)
    }

    /// `s = col(φ, ψ)`.
    pub fn s(&self) -> DVector<f64> {
        stack(&self.phi, &self.psi)
    }

    pub fn is_strictly_positive(&self) -> bool {
        [&self.gamma, &self.theta, &self.phi, &self.psi]
            .iter()
            .all(|v| v.iter().all(|&x| x > 0.0))
    }

    /// Largest violation of `z + φ = 1` and `z − ψ = −1`.
    pub fn bound_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n() {
            worst = worst
                .max((self.z[i] + self.phi[i] - 1.0).abs())
                .max((self.z[i] - self.psi[i] + 1.0).abs());
        }
        worst
    }

    /// Relative residual of `2λHz + 2λh + γ − θ = 0`, normalized by the
    /// magnitude of its terms.
    pub fn stationarity_residual(&self, hessian: &HessianForm, h: &DVector<f64>) -> f64 {
        let two_lambda = 2.0 * self.lambda;
        let hz = hessian.mul_vec(&self.z) * two_lambda;
        let lin = h * two_lambda;
        let r = &hz + &lin + &self.gamma - &self.theta;
        let scale = 1.0
            + hz.amax()
            + lin.amax()
            + self.gamma.amax()
            + self.theta.amax();
        r.amax() / scale
    }

    pub(crate) fn step(&mut self, alpha: f64, d: &super::newton::Direction) {
        self.z.axpy(alpha, &d.dz, 1.0);
        self.gamma.axpy(alpha, &d.dgamma, 1.0);
        self.theta.axpy(alpha, &d.dtheta, 1.0);
        self.phi.axpy(alpha, &d.dphi, 1.0);
        self.psi.axpy(alpha, &d.dpsi, 1.0);
        self.refresh_mu();
    }
}

pub(crate) fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.len();
    let mut out = DVector::zeros(n + b.len());
    out.rows_mut(0, n).copy_from(a);
    out.rows_mut(n, b.len()).copy_from(b);
    out
}

/// Cold-start point for `h ≠ 0`; `None` when `h = 0`, where `z* = 0` is the
/// optimum and no iteration is needed.
///
/// With `λ = β/(√2‖h‖)` the point `z = 0, γ = 1 − λh, θ = 1 + λh, φ = ψ = 1`
/// is strictly feasible with `μ = 1` and sits on the boundary of N(β).
pub fn initialize(problem: &BoxQpProblem) -> Option<IpmIterate> {
    initial_point(problem.h())
}

pub(crate) fn initial_point(h: &DVector<f64>) -> Option<IpmIterate> {
    let norm = h.norm();
    if norm == 0.0 {
        return None;
    }
    let n = h.len();
    let lambda = NEIGHBORHOOD_BETA / (std::f64::consts::SQRT_2 * norm);
    let ones = DVector::from_element(n, 1.0);
    let gamma = ones.clone() - h * lambda;
    let theta = ones.clone() + h * lambda;
    let mut it = IpmIterate {
        z: DVector::zeros(n),
        gamma,
        theta,
        phi: ones.clone(),
        psi: ones,
        lambda,
        mu: 0.0,
    };
    it.refresh_mu();
    Some(it)
}

/// `‖[γ⊙φ; θ⊙ψ] − μ1‖₂ / μ`; membership in N(β) is `residual ≤ β`.
pub fn neighborhood_residual(it: &IpmIterate) -> f64 {
    let mu = it.duality_measure();
    let mut acc = 0.0;
    for i in 0..it.n() {
        let a = it.gamma[i] * it.phi[i] - mu;
        let b = it.theta[i] * it.psi[i] - mu;
        acc += a * a + b * b;
    }
    acc.sqrt() / mu
}
