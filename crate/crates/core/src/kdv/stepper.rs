use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{KdvConfig, KdvError};

/// Reusable split-step integrator with its own FFT plans and scratch space.
///
/// One step is Strang splitting: half a step of exact dispersion
/// (`ŷ ← exp(i k³ dt/2)·ŷ`), a full RK4 step of `y_t = −∂ₓ(y²/2) + Σ uᵢvᵢ`,
/// then another half dispersion step. The nonlinear term is dealiased with
/// the 2/3 rule.
pub struct KdvStepper {
    n: usize,
    dt: f64,
    n_inputs: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(i k³ dt/2)`
    half_dispersion: Vec<Complex64>,
    /// `−i k / 2` on retained modes, 0 on dealiased ones.
    nonlinear_symbol: Vec<Complex64>,
    profiles: Vec<Vec<f64>>,
    forcing: Vec<f64>,
    spectrum: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    stages: [Vec<f64>; 4],
    tmp: Vec<f64>,
    steps: usize,
}

impl KdvStepper {
    pub fn new(cfg: &KdvConfig) -> Result<Self, KdvError> {
        cfg.validate()?;
        let n = cfg.n_grid;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scale = PI / cfg.half_length;
        let mut half_dispersion = Vec::with_capacity(n);
        let mut nonlinear_symbol = Vec::with_capacity(n);
        for j in 0..n {
            let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
            let k = scale * m as f64;
            // Nyquist mode has no well-defined odd derivative; drop it.
            let k_odd = if 2 * j == n { 0.0 } else { k };
            half_dispersion.push(Complex64::from_polar(1.0, k_odd.powi(3) * cfg.dt / 2.0));
            let keep = 3 * m.unsigned_abs() < n as u64;
            nonlinear_symbol.push(if keep {
                Complex64::new(0.0, -k_odd / 2.0)
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            n,
            dt: cfg.dt,
            n_inputs: cfg.n_inputs(),
            forward,
            inverse,
            half_dispersion,
            nonlinear_symbol,
            profiles: cfg.profiles(),
            forcing: vec![0.0; n],
            spectrum: vec![Complex64::new(0.0, 0.0); n],
            fft_scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            stages: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
            steps: 0,
        })
    }

    pub fn n_grid(&self) -> usize {
        self.n
    }

    /// Advances `y` by one `dt` under the constant input `u` (zero-order hold).
    pub fn step(&mut self, y: &mut [f64], u: &[f64]) -> Result<(), KdvError> {
        if y.len() != self.n || u.len() != self.n_inputs {
            return Err(KdvError::Dimension(format!(
                "state length {} (expected {}), input length {} (expected {})",
                y.len(),
                self.n,
                u.len(),
                self.n_inputs
            )));
        }
        self.forcing.iter_mut().for_each(|f| *f = 0.0);
        for (ui, v) in u.iter().zip(&self.profiles) {
            for (f, vj) in self.forcing.iter_mut().zip(v) {
                *f += ui * vj;
            }
        }

        self.dispersion_half_step(y);

        let dt = self.dt;
        let [k1, k2, k3, k4] = &mut self.stages;
        let tmp = &mut self.tmp;
        let mut eval = |src: &[f64], dst: &mut [f64]| {
            rhs(
                src,
                dst,
                &self.forcing,
                &self.nonlinear_symbol,
                &mut self.spectrum,
                &mut self.fft_scratch,
                self.forward.as_ref(),
                self.inverse.as_ref(),
            )
        };
        eval(y, k1);
        axpy_into(tmp, y, 0.5 * dt, k1);
        eval(tmp, k2);
        axpy_into(tmp, y, 0.5 * dt, k2);
        eval(tmp, k3);
        axpy_into(tmp, y, dt, k3);
        eval(tmp, k4);
        for j in 0..y.len() {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }

        self.dispersion_half_step(y);

        let step = self.steps;
        self.steps += 1;
        if y.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(KdvError::BlowUp { step })
        }
    }

    fn dispersion_half_step(&mut self, y: &mut [f64]) {
        for (c, &v) in self.spectrum.iter_mut().zip(y.iter()) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.spectrum, &mut self.fft_scratch);
        for (c, m) in self.spectrum.iter_mut().zip(&self.half_dispersion) {
            *c *= m;
        }
        self.inverse
            .process_with_scratch(&mut self.spectrum, &mut self.fft_scratch);
        let inv_n = 1.0 / self.n as f64;
        for (v, c) in y.iter_mut().zip(&self.spectrum) {
            *v = c.re * inv_n;
        }
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for j in 0..out.len() {
        out[j] = y[j] + a * k[j];
    }
}

/// `dst = −∂ₓ(y²/2) + forcing`, derivative taken spectrally.
#[allow(clippy::too_many_arguments)]
fn rhs(
    y: &[f64],
    dst: &mut [f64],
    forcing: &[f64],
    symbol: &[Complex64],
    spectrum: &mut [Complex64],
    scratch: &mut [Complex64],
    forward: &dyn Fft<f64>,
    inverse: &dyn Fft<f64>,
) {
    for (c, &v) in spectrum.iter_mut().zip(y) {
        *c = Complex64::new(v * v, 0.0);
    }
    forward.process_with_scratch(spectrum, scratch);
    for (c, s) in spectrum.iter_mut().zip(symbol) {
        *c *= s;
    }
    inverse.process_with_scratch(spectrum, scratch);
    let inv_n = 1.0 / y.len() as f64;
    for j in 0..y.len() {
        dst[j] = spectrum[j].re * inv_n + forcing[j];
    }
}

/// One step from a fresh stepper; prefer [`KdvStepper`] in loops.
pub fn kdv_step(y: &DVector<f64>, u: &[f64], cfg: &KdvConfig) -> Result<DVector<f64>, KdvError> {
    let mut out = y.clone();
    KdvStepper::new(cfg)?.step(out.as_mut_slice(), u)?;
    Ok(out)
}

/// Single soliton `12k²·sech²(k(x − 4k²t − x₀))` of the unforced equation,
/// wrapped onto the periodic domain (nearest image).
pub fn soliton(cfg: &KdvConfig, k: f64, x0: f64, t: f64) -> DVector<f64> {
    let period = 2.0 * cfg.half_length;
    let centre = x0 + 4.0 * k * k * t;
    DVector::from_iterator(
        cfg.n_grid,
        cfg.grid().into_iter().map(|x| {
            let d = (x - centre + cfg.half_length).rem_euclid(period) - cfg.half_length;
            12.0 * k * k / (k * d).cosh().powi(2)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_is_an_equilibrium() {
        let cfg = KdvConfig::default();
        let y = DVector::from_element(cfg.n_grid, 0.37);
        let out = kdv_step(&y, &[0.0; 4], &cfg).unwrap();
        assert!((out - y).amax() < 1e-14);
    }

    #[test]
    fn forcing_adds_mass_at_expected_rate() {
        // Only the forcing changes the zero mode: d/dt Σy = Σ uᵢ Σvᵢ.
        let cfg = KdvConfig::default();
        let y = DVector::zeros(cfg.n_grid);
        let u = [0.5, -0.2, 0.0, 1.0];
        let out = kdv_step(&y, &u, &cfg).unwrap();
        let expected: f64 = cfg
            .profiles()
            .iter()
            .zip(u)
            .map(|(v, ui)| ui * v.iter().sum::<f64>())
            .sum::<f64>()
            * cfg.dt;
        assert!((out.sum() - expected).abs() < 1e-12);
    }

    #[test]
    fn wrong_input_length() {
        let cfg = KdvConfig::default();
        let mut s = KdvStepper::new(&cfg).unwrap();
        let mut y = vec![0.0; cfg.n_grid];
        assert!(s.step(&mut y, &[0.0; 3]).is_err());
    }

    #[test]
    fn blow_up_reported() {
        let cfg = KdvConfig::default();
        let mut s = KdvStepper::new(&cfg).unwrap();
        let mut y = vec![0.0; cfg.n_grid];
        y[3] = f64::NAN;
        assert!(matches!(s.step(&mut y, &[0.0; 4]), Err(KdvError::BlowUp { step: 0 })));
    }
}
