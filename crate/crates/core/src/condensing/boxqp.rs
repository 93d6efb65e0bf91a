use nalgebra::{DMatrix, DVector};

use super::stack::{build_rbar, PredictionStack};
use super::{CondenseError, NmpcSpec};
use crate::boxqp::{BoxQpProblem, HessianForm, KoopmanHessian};

/// Dynamics-relaxed BoxQP for a fixed model, horizon and weights.
///
/// The Hessian never changes between sampling instants; only the linear term
/// `h(ψ₀) = G·ψ₀ + g` does, with `G = ρ[FᵀE; −E]` and
/// `g = −[W̄_u ū_r; W̄_x x̄_r]`.
#[derive(Debug, Clone)]
pub struct KoopmanBoxQp {
    pub hessian: HessianForm,
    /// `ρ[FᵀE; −E]`, `n × n_ψ`.
    pub h_map: DMatrix<f64>,
    /// Reference contribution `−[W̄_u ū_r; W̄_x x̄_r]`.
    pub h_const: DVector<f64>,
    horizon: usize,
    w_x: DVector<f64>,
    w_u: DVector<f64>,
}

impl KoopmanBoxQp {
    pub fn new(spec: &NmpcSpec, stack: &PredictionStack) -> Result<Self, CondenseError> {
        spec.validate()?;
        let n = spec.horizon;
        if stack.horizon != n || stack.n_x != spec.n_x || stack.n_u != spec.n_u {
            return Err(CondenseError::Dimension(format!(
                "prediction stack is (N={}, n_x={}, n_u={}), spec is (N={}, n_x={}, n_u={})",
                stack.horizon, stack.n_x, stack.n_u, n, spec.n_x, spec.n_u
            )));
        }
        let nu_tot = n * spec.n_u;
        let nx_tot = n * spec.n_x;
        let mut input_block = build_rbar(&spec.w_du, n);
        for i in 0..nu_tot {
            input_block[(i, i)] += spec.w_u[i % spec.n_u];
        }
        let state_diag = DVector::from_fn(nx_tot, |i, _| spec.w_x[i % spec.n_x]);
        let hessian = HessianForm::KoopmanStructured(KoopmanHessian {
            f: stack.f.clone(),
            input_block,
            state_diag,
            rho: spec.rho,
        });
        hessian.validate()?;

        let n_psi = stack.e.ncols();
        let mut h_map = DMatrix::zeros(nu_tot + nx_tot, n_psi);
        h_map
            .view_mut((0, 0), (nu_tot, n_psi))
            .copy_from(&(stack.f.tr_mul(&stack.e) * spec.rho));
        h_map
            .view_mut((nu_tot, 0), (nx_tot, n_psi))
            .copy_from(&(&stack.e * -spec.rho));

        let mut qp = Self {
            hessian,
            h_map,
            h_const: DVector::zeros(nu_tot + nx_tot),
            horizon: n,
            w_x: spec.w_x.clone(),
            w_u: spec.w_u.clone(),
        };
        qp.set_reference(&spec.x_r, &spec.u_r);
        Ok(qp)
    }

    pub fn dim(&self) -> usize {
        self.h_const.len()
    }

    pub fn n_psi(&self) -> usize {
        self.h_map.ncols()
    }

    /// Sets a reference held constant over the horizon.
    pub fn set_reference(&mut self, x_r: &DVector<f64>, u_r: &DVector<f64>) {
        let (nx, nu) = (self.w_x.len(), self.w_u.len());
        assert_eq!(x_r.len(), nx, "state reference length");
        assert_eq!(u_r.len(), nu, "input reference length");
        let nu_tot = self.horizon * nu;
        for i in 0..nu_tot {
            self.h_const[i] = -self.w_u[i % nu] * u_r[i % nu];
        }
        for i in 0..self.horizon * nx {
            self.h_const[nu_tot + i] = -self.w_x[i % nx] * x_r[i % nx];
        }
    }

    /// Sets stacked references `ū_r` (length `N·n_u`) and `x̄_r` (`N·n_x`),
    /// e.g. a reference preview over the horizon.
    pub fn set_reference_stack(&mut self, x_bar: &DVector<f64>, u_bar: &DVector<f64>) {
        let (nx, nu) = (self.w_x.len(), self.w_u.len());
        assert_eq!(x_bar.len(), self.horizon * nx, "stacked state reference length");
        assert_eq!(u_bar.len(), self.horizon * nu, "stacked input reference length");
        let nu_tot = u_bar.len();
        for i in 0..nu_tot {
            self.h_const[i] = -self.w_u[i % nu] * u_bar[i];
        }
        for i in 0..x_bar.len() {
            self.h_const[nu_tot + i] = -self.w_x[i % nx] * x_bar[i];
        }
    }

    /// Writes `h(ψ₀)` into `out` without allocating.
    pub fn h_into(&self, psi0: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(&self.h_const);
        out.gemv(1.0, &self.h_map, psi0, 1.0);
    }

    pub fn h(&self, psi0: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.h_into(psi0, &mut out);
        out
    }

    /// Standalone problem instance for `ψ₀` (clones the Hessian).
    pub fn problem(&self, psi0: &DVector<f64>) -> Result<BoxQpProblem, CondenseError> {
        Ok(BoxQpProblem::new(self.hessian.clone(), self.h(psi0))?)
    }

    /// Splits `z = col(U, X)` into the input and state stacks.
    pub fn split<'z>(&self, z: &'z [f64]) -> (&'z [f64], &'z [f64]) {
        z.split_at(self.horizon * self.w_u.len())
    }
}

/// Builds the relaxed BoxQP and its linear term at `psi0`.
pub fn build_boxqp(
    spec: &NmpcSpec,
    stack: &PredictionStack,
    psi0: &DVector<f64>,
) -> Result<(KoopmanBoxQp, DVector<f64>), CondenseError> {
    let qp = KoopmanBoxQp::new(spec, stack)?;
    if psi0.len() != qp.n_psi() {
        return Err(CondenseError::Dimension(format!(
            "psi0 has length {}, model lifts to {}",
            psi0.len(),
            qp.n_psi()
        )));
    }
    let h = qp.h(psi0);
    Ok((qp, h))
}
