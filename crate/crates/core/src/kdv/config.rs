use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::KdvError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdvConfig {
    /// The domain is the periodic interval `[−half_length, half_length)`.
    pub half_length: f64,
    pub n_grid: usize,
    pub dt: f64,
    /// Centers `mᵢ` of the forcing profiles `vᵢ(x) = exp(−width·(x − mᵢ)²)`.
    pub profile_centers: Vec<f64>,
    pub profile_width: f64,
}

impl Default for KdvConfig {
    fn default() -> Self {
        Self {
            half_length: PI,
            n_grid: 100,
            dt: 0.01,
            profile_centers: vec![-PI / 2.0, -PI / 6.0, PI / 6.0, PI / 2.0],
            profile_width: 25.0,
        }
    }
}

impl KdvConfig {
    pub fn validate(&self) -> Result<(), KdvError> {
        let bad = |m: String| Err(KdvError::Config(m));
        if self.n_grid < 16 || self.n_grid % 2 != 0 {
            return bad(format!("n_grid must be even and at least 16, got {}", self.n_grid));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return bad(format!("half_length must be positive, got {}", self.half_length));
        }
        if self.profile_centers.is_empty() {
            return bad("at least one forcing profile is required".into());
        }
        if !(self.profile_width > 0.0) {
            return bad(format!("profile_width must be positive, got {}", self.profile_width));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.profile_centers.len()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_grid as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_grid).map(|j| -self.half_length + j as f64 * dx).collect()
    }

    /// Forcing profiles sampled on the grid, one `Vec` per input.
    pub fn profiles(&self) -> Vec<Vec<f64>> {
        let x = self.grid();
        self.profile_centers
            .iter()
            .map(|&m| x.iter().map(|&xj| (-self.profile_width * (xj - m).powi(2)).exp()).collect())
            .collect()
    }

    /// `Σᵢ aᵢ vᵢ` on the grid.
    pub fn combine_profiles(&self, a: &[f64]) -> DVector<f64> {
        let mut y = DVector::zeros(self.n_grid);
        for (ai, v) in a.iter().zip(self.profiles()) {
            for (yj, vj) in y.iter_mut().zip(v) {
                *yj += ai * vj;
            }
        }
        y
    }
}

/// Spatially uniform sinusoid `a·sin(ω t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidalReference {
    pub amplitude: f64,
    pub omega: f64,
}

impl Default for SinusoidalReference {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            omega: 2.0 * PI / 25.0,
        }
    }
}

impl SinusoidalReference {
    pub fn at(&self, t: f64, n_grid: usize) -> DVector<f64> {
        DVector::from_element(n_grid, self.amplitude * (self.omega * t).sin())
    }
}

pub fn sinusoidal_reference(t: f64, n_grid: usize) -> DVector<f64> {
    SinusoidalReference::default().at(t, n_grid)
}
