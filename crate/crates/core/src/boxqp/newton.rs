//! Newton systems of the feasible IPM.
//!
//! Eliminating `Δγ, Δθ, Δφ, Δψ` from the `5n`-dimensional Newton system gives
//!
//! ```text
//! (2λH + diag(γ/φ + θ/ψ)) Δz = γ − θ − σμ(1/φ − 1/ψ)
//! Δγ = σμ/φ − γ + (γ/φ)Δz      Δφ = −Δz
//! Δθ = σμ/ψ − θ − (θ/ψ)Δz      Δψ =  Δz
//! ```
//!
//! Two backends factor the `n × n` matrix: a dense Cholesky, and a Schur
//! complement on the input block for the Koopman-structured Hessian whose
//! state block is diagonal.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::iterate::{stack, IpmIterate};
use super::problem::{BoxQpProblem, HessianForm, KoopmanHessian};
use super::SolverError;

/// Search direction `(Δz, Δv, Δs)` with `v = col(γ, θ)`, `s = col(φ, ψ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dz: DVector<f64>,
    pub dgamma: DVector<f64>,
    pub dtheta: DVector<f64>,
    pub dphi: DVector<f64>,
    pub dpsi: DVector<f64>,
}

impl Direction {
    pub fn dv(&self) -> DVector<f64> {
        stack(&self.dgamma, &self.dtheta)
    }

    pub fn ds(&self) -> DVector<f64> {
        stack(&self.dphi, &self.dpsi)
    }

    /// `ΔvᵀΔs`, equal to `Δzᵀ(2λH)Δz ≥ 0` for exact directions.
    pub fn curvature(&self) -> f64 {
        self.dgamma.dot(&self.dphi) + self.dtheta.dot(&self.dpsi)
    }
}

/// Linear-algebra backend used for the reduced Newton system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Structured when the Hessian allows it, dense otherwise.
    #[default]
    Auto,
    Dense,
    Structured,
}

/// Factored reduced Newton matrix at one iterate.
pub(crate) enum NewtonSystem<'a> {
    Dense(DenseNewton<'a>),
    Structured(StructuredNewton<'a>),
}

impl<'a> NewtonSystem<'a> {
    pub(crate) fn new(
        hessian: &'a HessianForm,
        backend: Backend,
        refine: bool,
    ) -> Result<Self, SolverError> {
        match (backend, hessian) {
            (Backend::Dense, _) | (Backend::Auto, HessianForm::Dense(_)) => {
                Ok(NewtonSystem::Dense(DenseNewton::new(hessian, refine)))
            }
            (Backend::Structured | Backend::Auto, HessianForm::KoopmanStructured(k)) => {
                Ok(NewtonSystem::Structured(StructuredNewton::new(k)))
            }
            (Backend::Structured, HessianForm::Dense(_)) => Err(SolverError::InvalidProblem(
                "structured backend requires a Koopman-structured hessian".into(),
            )),
        }
    }

    /// Factors `2λH + diag(γ/φ + θ/ψ)` at `it`.
    pub(crate) fn factor(&mut self, it: &IpmIterate) -> Result<(), SolverError> {
        let barrier = barrier_diagonal(it);
        match self {
            NewtonSystem::Dense(d) => d.factor(it.lambda, &barrier),
            NewtonSystem::Structured(s) => s.factor(it.lambda, &barrier),
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            NewtonSystem::Dense(d) => d.solve(rhs),
            NewtonSystem::Structured(s) => s.solve(rhs),
        }
    }

    /// Direction at the iterate last passed to [`factor`](Self::factor).
    pub(crate) fn direction(&self, it: &IpmIterate, sigma: f64, mu: f64) -> Direction {
        let n = it.n();
        let smu = sigma * mu;
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            rhs[i] = it.gamma[i] - it.theta[i] - smu * (1.0 / it.phi[i] - 1.0 / it.psi[i]);
        }
        let dz = self.solve(&rhs);
        let mut dgamma = DVector::zeros(n);
        let mut dtheta = DVector::zeros(n);
        for i in 0..n {
            dgamma[i] = smu / it.phi[i] - it.gamma[i] + it.gamma[i] / it.phi[i] * dz[i];
            dtheta[i] = smu / it.psi[i] - it.theta[i] - it.theta[i] / it.psi[i] * dz[i];
        }
        Direction {
            dphi: -&dz,
            dpsi: dz.clone(),
            dz,
            dgamma,
            dtheta,
        }
    }
}

fn barrier_diagonal(it: &IpmIterate) -> DVector<f64> {
    DVector::from_fn(it.n(), |i, _| {
        it.gamma[i] / it.phi[i] + it.theta[i] / it.psi[i]
    })
}

pub(crate) struct DenseNewton<'a> {
    hessian: std::borrow::Cow<'a, DMatrix<f64>>,
    matrix: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    refine: bool,
}

impl<'a> DenseNewton<'a> {
    fn new(hessian: &'a HessianForm, refine: bool) -> Self {
        let hessian = match hessian {
            HessianForm::Dense(m) => std::borrow::Cow::Borrowed(m),
            HessianForm::KoopmanStructured(k) => std::borrow::Cow::Owned(k.expand()),
        };
        let n = hessian.nrows();
        Self {
            hessian,
            matrix: DMatrix::zeros(n, n),
            chol: None,
            refine,
        }
    }

    fn factor(&mut self, lambda: f64, barrier: &DVector<f64>) -> Result<(), SolverError> {
        let two_lambda = 2.0 * lambda;
        self.matrix.copy_from(&self.hessian);
        self.matrix *= two_lambda;
        for (i, b) in barrier.iter().enumerate() {
            self.matrix[(i, i)] += b;
        }
        self.chol = Some(
            Cholesky::new(self.matrix.clone()).ok_or(SolverError::FactorizationFailed)?,
        );
        Ok(())
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let chol = self.chol.as_ref().expect("factor before solve");
        let mut x = chol.solve(rhs);
        if self.refine {
            let r = rhs - &self.matrix * &x;
            x += chol.solve(&r);
        }
        x
    }
}

/// Schur-complement solver for
///
/// ```text
/// [ H̄₁₁      −cFᵀ ] [Δz_U]   [r_U]
/// [ −cF       H̄₂₂ ] [Δz_X] = [r_X],     c = 2λρ,  H̄₂₂ diagonal.
/// ```
///
/// Only `S = H̄₁₁ − c²FᵀH̄₂₂⁻¹F` (dimension `N·n_u`) is factored.
pub(crate) struct StructuredNewton<'a> {
    k: &'a KoopmanHessian,
    /// Contiguous row ranges of F sharing the same nonzero column prefix,
    /// `(first_row, row_count, width)`. A block lower-triangular F yields one
    /// run per block row.
    runs: Vec<(usize, usize, usize)>,
    f_t: DMatrix<f64>,
    /// `Fᵀ diag(√g)`, kept transposed so each run is a contiguous column
    /// slice and the update goes through the blocked GEMM kernel.
    scaled_ft: DMatrix<f64>,
    schur: DMatrix<f64>,
    state_block: DVector<f64>,
    coupling: f64,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl<'a> StructuredNewton<'a> {
    fn new(k: &'a KoopmanHessian) -> Self {
        let nu = k.n_inputs();
        let nx = k.n_states();
        Self {
            k,
            runs: row_runs(&k.f),
            f_t: k.f.transpose(),
            scaled_ft: DMatrix::zeros(nu, nx),
            schur: DMatrix::zeros(nu, nu),
            state_block: DVector::zeros(nx),
            coupling: 0.0,
            chol: None,
        }
    }

    fn factor(&mut self, lambda: f64, barrier: &DVector<f64>) -> Result<(), SolverError> {
        let k = self.k;
        let nu = k.n_inputs();
        let two_lambda = 2.0 * lambda;
        let c = two_lambda * k.rho;
        self.coupling = c;

        // H̄₁₁ − c²FᵀH̄₂₂⁻¹F = 2λ·input_block + diag(b_U) + Fᵀ diag(g) F with
        // g = c − c²/d = c·(2λw + b_X)/d, which avoids the cancellation.
        self.schur.copy_from(&k.input_block);
        self.schur *= two_lambda;
        for i in 0..nu {
            self.schur[(i, i)] += barrier[i];
        }
        for i in 0..k.n_states() {
            let extra = two_lambda * k.state_diag[i] + barrier[nu + i];
            let d = c + extra;
            self.state_block[i] = d;
            let g = c * extra / d;
            let sg = g.sqrt();
            let mut col = self.scaled_ft.column_mut(i);
            col.copy_from(&self.f_t.column(i));
            col *= sg;
        }
        for &(start, len, width) in &self.runs {
            if width == 0 {
                continue;
            }
            let a = self.scaled_ft.view((0, start), (width, len));
            let a_t = a.transpose();
            self.schur
                .view_mut((0, 0), (width, width))
                .gemm(1.0, &a, &a_t, 1.0);
        }
        self.chol = Some(
            Cholesky::new(self.schur.clone()).ok_or(SolverError::FactorizationFailed)?,
        );
        Ok(())
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let chol = self.chol.as_ref().expect("factor before solve");
        let k = self.k;
        let nu = k.n_inputs();
        let nx = k.n_states();
        let c = self.coupling;
        let r_u = rhs.rows(0, nu);
        let r_x = rhs.rows(nu, nx);
        let t = r_x.component_div(&self.state_block);
        let mut top = r_u.into_owned();
        top.gemv_tr(c, &k.f, &t, 1.0);
        let x_u = chol.solve(&top);
        let mut x_x = r_x.into_owned();
        x_x.gemv(c, &k.f, &x_u, 1.0);
        x_x.component_div_assign(&self.state_block);
        stack(&x_u, &x_x)
    }
}

fn row_runs(f: &DMatrix<f64>) -> Vec<(usize, usize, usize)> {
    let widths: Vec<usize> = f
        .row_iter()
        .map(|row| {
            row.iter()
                .rposition(|&v| v != 0.0)
                .map_or(0, |j| j + 1)
        })
        .collect();
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &w) in widths.iter().enumerate() {
        match runs.last_mut() {
            Some(last) if last.2 == w => last.1 += 1,
            _ => runs.push((i, 1, w)),
        }
    }
    runs
}

/// Newton direction from the dense reduced system.
///
/// `sigma` is 0 for the predictor and 1 for the corrector.
pub fn newton_direction(
    it: &IpmIterate,
    problem: &BoxQpProblem,
    sigma: f64,
    mu: f64,
) -> Result<Direction, SolverError> {
    let mut sys = NewtonSystem::new(problem.hessian(), Backend::Dense, false)?;
    sys.factor(it)?;
    Ok(sys.direction(it, sigma, mu))
}

/// Newton direction through the Schur complement on the input block.
pub fn newton_direction_structured(
    it: &IpmIterate,
    problem: &BoxQpProblem,
    sigma: f64,
    mu: f64,
) -> Result<Direction, SolverError> {
    let mut sys = NewtonSystem::new(problem.hessian(), Backend::Structured, false)?;
    sys.factor(it)?;
    Ok(sys.direction(it, sigma, mu))
}
