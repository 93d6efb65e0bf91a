use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Seed used for RBF centers when none is given.
pub const DEFAULT_CENTER_SEED: u64 = 20_250_101;

/// Thin-plate spline `r² ln r`, continuously extended by 0 at `r = 0`.
pub fn thin_plate(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Observable dictionary `ψ(x) = [x; φ₁(x); …; φ_m(x)]` with thin-plate RBFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftSpec {
    pub n_x: usize,
    /// `n_rbf × n_x`, one center per row.
    pub centers: DMatrix<f64>,
}

impl LiftSpec {
    pub fn new(n_x: usize, centers: DMatrix<f64>) -> Self {
        assert!(
            centers.nrows() == 0 || centers.ncols() == n_x,
            "centers have {} columns, state has {n_x}",
            centers.ncols()
        );
        Self { n_x, centers }
    }

    /// Lift without RBFs; the model is then linear in the raw state.
    pub fn identity(n_x: usize) -> Self {
        Self {
            n_x,
            centers: DMatrix::zeros(0, n_x),
        }
    }

    pub fn n_rbf(&self) -> usize {
        self.centers.nrows()
    }

    pub fn n_psi(&self) -> usize {
        self.n_x + self.n_rbf()
    }

    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_psi());
        self.lift_into(x.as_slice(), out.as_mut_slice());
        out
    }

    /// Writes `ψ(x)` into `out`, which must have length `n_psi`.
    pub fn lift_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_x);
        debug_assert_eq!(out.len(), self.n_psi());
        out[..self.n_x].copy_from_slice(x);
        for (i, slot) in out[self.n_x..].iter_mut().enumerate() {
            let mut r2 = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                let d = xj - self.centers[(i, j)];
                r2 += d * d;
            }
            *slot = thin_plate(r2.sqrt());
        }
    }

    /// Lifts every row of `states` (`rows × n_x`) into a `rows × n_psi` matrix.
    pub fn lift_rows(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let n = states.nrows();
        let n_psi = self.n_psi();
        let mut rows = vec![0.0; n * n_psi];
        rows.par_chunks_mut(n_psi).enumerate().for_each(|(k, out)| {
            let x: Vec<f64> = states.row(k).iter().copied().collect();
            self.lift_into(&x, out);
        });
        DMatrix::from_row_slice(n, n_psi, &rows)
    }

    /// `C = [I, 0]`, recovering the state from the lifted vector.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n_x, self.n_psi());
        c.fill_diagonal(1.0);
        c
    }
}

/// Uniform i.i.d. centers inside per-coordinate `bounds`, reproducible from `seed`.
pub fn sample_rbf_centers(
    n_rbf: usize,
    bounds: &[(f64, f64)],
    seed: u64,
) -> DMatrix<f64> {
    let n_x = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = DMatrix::zeros(n_rbf, n_x);
    for i in 0..n_rbf {
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            c[(i, j)] = rng.gen_range(lo..=hi);
        }
    }
    c
}
