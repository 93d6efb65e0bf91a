use nalgebra::{Cholesky, DMatrix, DVector};

use super::SolverError;

/// Quadratic term of a box-constrained QP.
///
/// The Koopman-structured form stores the dynamics-relaxed Hessian
///
/// ```text
/// H = rho * [FᵀF  -Fᵀ]  +  [input_block        0       ]
///           [-F     I ]     [     0       diag(state_diag)]
/// ```
///
/// without ever materializing the `(N·n_x)²` state block.
#[derive(Debug, Clone, PartialEq)]
pub enum HessianForm {
    Dense(DMatrix<f64>),
    KoopmanStructured(KoopmanHessian),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanHessian {
    /// Condensed input-to-state map, `(N·n_x) × (N·n_u)`.
    pub f: DMatrix<f64>,
    /// `W̄_u + R̄`, symmetric `(N·n_u) × (N·n_u)`.
    pub input_block: DMatrix<f64>,
    /// `diag(W̄_x)`, length `N·n_x`.
    pub state_diag: DVector<f64>,
    pub rho: f64,
}

impl KoopmanHessian {
    pub fn n_inputs(&self) -> usize {
        self.f.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.f.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_inputs() + self.n_states()
    }

    /// Expands to the dense `n × n` Hessian with ordering `col(U, X)`.
    pub fn expand(&self) -> DMatrix<f64> {
        let nu = self.n_inputs();
        let nx = self.n_states();
        let n = nu + nx;
        let rho = self.rho;
        let mut h = DMatrix::zeros(n, n);
        let ftf = self.f.tr_mul(&self.f);
        h.view_mut((0, 0), (nu, nu))
            .copy_from(&(ftf * rho + &self.input_block));
        h.view_mut((nu, 0), (nx, nu)).copy_from(&(&self.f * -rho));
        h.view_mut((0, nu), (nu, nx))
            .copy_from(&(self.f.transpose() * -rho));
        for i in 0..nx {
            h[(nu + i, nu + i)] = rho + self.state_diag[i];
        }
        h
    }

    /// `H·z` without expanding the Hessian.
    pub fn mul_vec(&self, z: &DVector<f64>) -> DVector<f64> {
        let nu = self.n_inputs();
        let nx = self.n_states();
        let u = z.rows(0, nu);
        let x = z.rows(nu, nx);
        // rho·(F u − x) is the dynamics-defect gradient shared by both blocks.
        let defect = (&self.f * u - x) * self.rho;
        let mut out = DVector::zeros(nu + nx);
        out.rows_mut(0, nu)
            .copy_from(&(self.f.tr_mul(&defect) + &self.input_block * u));
        let mut xs = out.rows_mut(nu, nx);
        for i in 0..nx {
            xs[i] = -defect[i] + self.state_diag[i] * x[i];
        }
        out
    }

    fn validate(&self) -> Result<(), SolverError> {
        let nu = self.n_inputs();
        if self.input_block.nrows() != nu || self.input_block.ncols() != nu {
            return Err(SolverError::Dimension(format!(
                "input_block is {}x{}, expected {nu}x{nu}",
                self.input_block.nrows(),
                self.input_block.ncols()
            )));
        }
        if self.state_diag.len() != self.n_states() {
            return Err(SolverError::Dimension(format!(
                "state_diag has length {}, expected {}",
                self.state_diag.len(),
                self.n_states()
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SolverError::InvalidProblem(format!(
                "rho must be positive and finite, got {}",
                self.rho
            )));
        }
        if let Some(i) = self.state_diag.iter().position(|&w| !(w > 0.0)) {
            return Err(SolverError::InvalidProblem(format!(
                "state_diag[{i}] = {} is not strictly positive",
                self.state_diag[i]
            )));
        }
        if !is_symmetric(&self.input_block) {
            return Err(SolverError::InvalidProblem(
                "input_block is not symmetric".into(),
            ));
        }
        // H ≻ 0 iff its Schur complement on the input block is ≻ 0. With the
        // diagonal state block D = rho + w the complement is
        // input_block + Fᵀ diag(rho·w / (rho + w)) F.
        let weights = self
            .state_diag
            .map(|w| self.rho * w / (self.rho + w));
        let mut schur = self.input_block.clone();
        let mut scaled = self.f.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= weights[i].sqrt();
        }
        schur.gemm_tr(1.0, &scaled, &scaled, 1.0);
        if Cholesky::new(schur).is_none() {
            return Err(SolverError::NotPositiveDefinite);
        }
        Ok(())
    }
}

impl HessianForm {
    pub fn dim(&self) -> usize {
        match self {
            HessianForm::Dense(m) => m.nrows(),
            HessianForm::KoopmanStructured(k) => k.dim(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            HessianForm::Dense(m) => m.clone(),
            HessianForm::KoopmanStructured(k) => k.expand(),
        }
    }

    pub fn mul_vec(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            HessianForm::Dense(m) => m * z,
            HessianForm::KoopmanStructured(k) => k.mul_vec(z),
        }
    }

    /// Checks shape, symmetry and positive definiteness.
    pub fn validate(&self) -> Result<(), SolverError> {
        match self {
            HessianForm::Dense(m) => {
                if m.nrows() != m.ncols() {
                    return Err(SolverError::Dimension(format!(
                        "dense hessian is {}x{}, expected square",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if !is_symmetric(m) {
                    return Err(SolverError::InvalidProblem(
                        "dense hessian is not symmetric".into(),
                    ));
                }
                if Cholesky::new(m.clone()).is_none() {
                    return Err(SolverError::NotPositiveDefinite);
                }
                Ok(())
            }
            HessianForm::KoopmanStructured(k) => k.validate(),
        }
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

/// Strictly convex QP `min ½ zᵀHz + hᵀz` subject to `-1 ≤ z ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpProblem {
    hessian: HessianForm,
    h: DVector<f64>,
}

impl BoxQpProblem {
    /// Validates dimensions and positive definiteness of the Hessian.
    pub fn new(hessian: HessianForm, h: DVector<f64>) -> Result<Self, SolverError> {
        let n = hessian.dim();
        if n == 0 {
            return Err(SolverError::Dimension("problem dimension is zero".into()));
        }
        if h.len() != n {
            return Err(SolverError::Dimension(format!(
                "linear term has length {}, hessian dimension is {n}",
                h.len()
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem(
                "linear term has non-finite entries".into(),
            ));
        }
        hessian.validate()?;
        Ok(Self { hessian, h })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn hessian(&self) -> &HessianForm {
        &self.hessian
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    /// Replaces the linear term, keeping the (already validated) Hessian.
    pub fn set_h(&mut self, h: DVector<f64>) -> Result<(), SolverError> {
        if h.len() != self.n() {
            return Err(SolverError::Dimension(format!(
                "linear term has length {}, hessian dimension is {}",
                h.len(),
                self.n()
            )));
        }
        self.h = h;
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&self.hessian.mul_vec(z)) + self.h.dot(z)
    }
}
