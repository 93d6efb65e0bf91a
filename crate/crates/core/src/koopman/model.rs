use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lift::LiftSpec;
use super::EdmdError;
use crate::boxqp::format::row_major;

/// Lifted linear predictor `ψ_{k+1} = Aψ_k + Bu_k`, `x_k = Cψ_k`, `C = [I, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub lift: LiftSpec,
    /// Ridge used in the fit (metadata).
    pub ridge: f64,
    /// Seed the RBF centers were drawn with, if known (metadata).
    pub seed: Option<u64>,
}

impl KoopmanModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, lift: LiftSpec) -> Self {
        assert_eq!(a.nrows(), lift.n_psi());
        assert_eq!(a.ncols(), lift.n_psi());
        assert_eq!(b.nrows(), lift.n_psi());
        Self {
            a,
            b,
            lift,
            ridge: 0.0,
            seed: None,
        }
    }

    pub fn n_x(&self) -> usize {
        self.lift.n_x
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_psi(&self) -> usize {
        self.lift.n_psi()
    }

    pub fn c(&self) -> DMatrix<f64> {
        self.lift.output_matrix()
    }

    /// Rolls the lifted model forward from `x0`; returns `x_1, …, x_N`.
    pub fn predict(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut psi = self.lift.lift(x0);
        inputs
            .iter()
            .map(|u| {
                psi = &self.a * &psi + &self.b * u;
                psi.rows(0, self.n_x()).into_owned()
            })
            .collect()
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            n_x: self.n_x(),
            n_u: self.n_u(),
            n_psi: self.n_psi(),
            a: row_major(&self.a),
            b: row_major(&self.b),
            centers: row_major(&self.lift.centers),
            ridge: self.ridge,
            seed: self.seed,
        }
    }
}

/// JSON model file; matrices are flat row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_x: usize,
    pub n_u: usize,
    pub n_psi: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    pub centers: Vec<f64>,
    pub ridge: f64,
    pub seed: Option<u64>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<KoopmanModel, EdmdError> {
        let (nx, nu, np) = (self.n_x, self.n_u, self.n_psi);
        if np < nx {
            return Err(EdmdError::Dimension(format!("n_psi = {np} is smaller than n_x = {nx}")));
        }
        let n_rbf = np - nx;
        let check = |name: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(EdmdError::Dimension(format!("{name} has {len} entries, expected {want}")))
            }
        };
        check("A", self.a.len(), np * np)?;
        check("B", self.b.len(), np * nu)?;
        check("centers", self.centers.len(), n_rbf * nx)?;
        let lift = LiftSpec::new(nx, DMatrix::from_row_slice(n_rbf, nx, &self.centers));
        let mut m = KoopmanModel::new(
            DMatrix::from_row_slice(np, np, &self.a),
            DMatrix::from_row_slice(np, nu, &self.b),
            lift,
        );
        m.ridge = self.ridge;
        m.seed = self.seed;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dynamics_hold_state() {
        let lift = LiftSpec::new(2, DMatrix::from_row_slice(1, 2, &[0.3, 0.3]));
        let m = KoopmanModel::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 1), lift);
        let x0 = DVector::from_vec(vec![0.4, -0.2]);
        let xs = m.predict(&x0, &vec![DVector::zeros(1); 4]);
        assert!(xs.iter().all(|x| x == &x0));
    }

    #[test]
    fn single_step_definition() {
        let lift = LiftSpec::new(1, DMatrix::from_row_slice(1, 1, &[0.5]));
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.2, 0.7]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let m = KoopmanModel::new(a.clone(), b.clone(), lift.clone());
        let x0 = DVector::from_element(1, 0.2);
        let u = DVector::from_element(1, -0.3);
        let expect = m.c() * (&a * lift.lift(&x0) + &b * &u);
        assert_eq!(m.predict(&x0, &[u]), vec![expect]);
    }

    #[test]
    fn file_round_trip() {
        let lift = LiftSpec::new(2, DMatrix::from_row_slice(1, 2, &[0.1, 0.2]));
        let mut m = KoopmanModel::new(
            DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64),
            DMatrix::from_fn(3, 2, |i, j| (i as f64) - (j as f64)),
            lift,
        );
        m.ridge = 1e-8;
        m.seed = Some(4);
        let text = serde_json::to_string(&m.to_file()).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_model().unwrap(), m);
    }
}
