use nalgebra::{DMatrix, DVector};

use super::stack::{build_rbar, PredictionStack};
use super::{CondenseError, NmpcSpec};

/// Input-only condensed QP with explicit state constraints.
///
/// Minimize `½UᵀHU + hᵀU` subject to `G·U ≤ b`, where the rows of `G` are
/// `[F; −F; I; −I]` (state upper/lower, input upper/lower bounds of ±1).
/// Built for inspection only; nothing in this crate solves it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralQp {
    pub hessian: DMatrix<f64>,
    pub h: DVector<f64>,
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl GeneralQp {
    pub fn n_decision(&self) -> usize {
        self.h.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }
}

pub fn build_general_qp(
    spec: &NmpcSpec,
    stack: &PredictionStack,
    psi0: &DVector<f64>,
) -> Result<GeneralQp, CondenseError> {
    spec.validate()?;
    if psi0.len() != stack.e.ncols() {
        return Err(CondenseError::Dimension(format!(
            "psi0 has length {}, E has {} columns",
            psi0.len(),
            stack.e.ncols()
        )));
    }
    let n = spec.horizon;
    let nu_tot = n * spec.n_u;
    let nx_tot = n * spec.n_x;
    let f = &stack.f;
    let wx = DVector::from_fn(nx_tot, |i, _| spec.w_x[i % spec.n_x]);

    let mut wf = f.clone();
    for (i, mut row) in wf.row_iter_mut().enumerate() {
        row *= wx[i];
    }
    let mut hessian = f.tr_mul(&wf) + build_rbar(&spec.w_du, n);
    for i in 0..nu_tot {
        hessian[(i, i)] += spec.w_u[i % spec.n_u];
    }

    let free = &stack.e * psi0;
    let x_bar = DVector::from_fn(nx_tot, |i, _| spec.x_r[i % spec.n_x]);
    let weighted = (&free - &x_bar).component_mul(&wx);
    let mut h = f.tr_mul(&weighted);
    for i in 0..nu_tot {
        h[i] -= spec.w_u[i % spec.n_u] * spec.u_r[i % spec.n_u];
    }

    let rows = 2 * (nx_tot + nu_tot);
    let mut g = DMatrix::zeros(rows, nu_tot);
    let mut b = DVector::zeros(rows);
    g.view_mut((0, 0), (nx_tot, nu_tot)).copy_from(f);
    g.view_mut((nx_tot, 0), (nx_tot, nu_tot)).copy_from(&(-f));
    for i in 0..nx_tot {
        b[i] = 1.0 - free[i];
        b[nx_tot + i] = 1.0 + free[i];
    }
    let off = 2 * nx_tot;
    for i in 0..nu_tot {
        g[(off + i, i)] = 1.0;
        g[(off + nu_tot + i, i)] = -1.0;
        b[off + i] = 1.0;
        b[off + nu_tot + i] = 1.0;
    }
    Ok(GeneralQp { hessian, h, g, b })
}
