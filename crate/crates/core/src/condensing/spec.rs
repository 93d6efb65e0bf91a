use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::CondenseError;

/// Tracking MPC data: horizon, diagonal weights, references and the
/// dynamics-relaxation penalty `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcSpec {
    pub horizon: usize,
    pub n_x: usize,
    pub n_u: usize,
    pub w_x: DVector<f64>,
    pub w_u: DVector<f64>,
    pub w_du: DVector<f64>,
    pub x_r: DVector<f64>,
    pub u_r: DVector<f64>,
    pub rho: f64,
}

impl NmpcSpec {
    /// Uniform weights, zero references.
    pub fn uniform(horizon: usize, n_x: usize, n_u: usize, w_x: f64, w_u: f64, w_du: f64, rho: f64) -> Self {
        Self {
            horizon,
            n_x,
            n_u,
            w_x: DVector::from_element(n_x, w_x),
            w_u: DVector::from_element(n_u, w_u),
            w_du: DVector::from_element(n_u, w_du),
            x_r: DVector::zeros(n_x),
            u_r: DVector::zeros(n_u),
            rho,
        }
    }

    /// Decision-vector length `N·(n_u + n_x)`.
    pub fn n_decision(&self) -> usize {
        self.horizon * (self.n_u + self.n_x)
    }

    pub fn validate(&self) -> Result<(), CondenseError> {
        let bad = |m: String| Err(CondenseError::InvalidSpec(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        for (name, v, len) in [
            ("w_x", &self.w_x, self.n_x),
            ("w_u", &self.w_u, self.n_u),
            ("w_du", &self.w_du, self.n_u),
            ("x_r", &self.x_r, self.n_x),
            ("u_r", &self.u_r, self.n_u),
        ] {
            if v.len() != len {
                return Err(CondenseError::Dimension(format!(
                    "{name} has length {}, expected {len}",
                    v.len()
                )));
            }
        }
        if self.w_x.iter().any(|&w| !(w > 0.0)) || self.w_u.iter().any(|&w| !(w > 0.0)) {
            return bad("w_x and w_u must be strictly positive".into());
        }
        if self.w_du.iter().any(|&w| !(w >= 0.0)) {
            return bad("w_du must be non-negative".into());
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if self.x_r.iter().chain(self.u_r.iter()).any(|r| !(-1.0..=1.0).contains(r)) {
            return bad("references must lie in [-1, 1]".into());
        }
        Ok(())
    }
}
