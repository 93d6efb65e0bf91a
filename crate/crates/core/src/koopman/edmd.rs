use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use super::lift::LiftSpec;
use super::model::KoopmanModel;
use super::snapshots::SnapshotSet;
use super::EdmdError;

/// Ridge used when the caller does not choose one.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Lifted regressors `Φ = [ψ(x_j)ᵀ, u_jᵀ]` and targets `ψ(x_j⁺)ᵀ`.
struct Regression {
    phi: DMatrix<f64>,
    target: DMatrix<f64>,
}

fn regression(data: &SnapshotSet, spec: &LiftSpec) -> Regression {
    let psi = spec.lift_rows(&data.x);
    let target = spec.lift_rows(&data.x_plus);
    let n_psi = spec.n_psi();
    let mut phi = DMatrix::zeros(data.len(), n_psi + data.n_u());
    phi.columns_mut(0, n_psi).copy_from(&psi);
    phi.columns_mut(n_psi, data.n_u()).copy_from(&data.u);
    Regression { phi, target }
}

/// EDMD with control: minimizes `Σ_j ‖ψ(x_j⁺) − Aψ(x_j) − Bu_j‖²` over `[A B]`.
///
/// Solved through the normal equations
/// `(ΦᵀΦ/N_d + ridge·I) [A B]ᵀ = ΦᵀΨ⁺/N_d`; `ridge = 0` gives the
/// pseudoinverse solution when `Φ` has full column rank.
pub fn fit_edmd(data: &SnapshotSet, spec: &LiftSpec, ridge: f64) -> Result<KoopmanModel, EdmdError> {
    if data.n_x() != spec.n_x {
        return Err(EdmdError::Dimension(format!(
            "snapshots have {} states, lift expects {}",
            data.n_x(),
            spec.n_x
        )));
    }
    if !(ridge >= 0.0) {
        return Err(EdmdError::InvalidRidge(ridge));
    }
    let n_psi = spec.n_psi();
    let n_u = data.n_u();
    let p = n_psi + n_u;
    if data.len() < p {
        log::warn!(
            "{} snapshots for {p} regressors; the fit is underdetermined without ridge",
            data.len()
        );
    }
    let reg = regression(data, spec);
    let scale = 1.0 / data.len().max(1) as f64;
    let mut gram = reg.phi.tr_mul(&reg.phi) * scale;
    for i in 0..p {
        gram[(i, i)] += ridge;
    }
    let cross = reg.phi.tr_mul(&reg.target) * scale;
    let chol = match Cholesky::new(gram.clone()) {
        Some(c) => c,
        None => {
            let eig = SymmetricEigen::new(gram).eigenvalues;
            let smallest = eig.min().max(0.0).sqrt();
            return Err(EdmdError::RankDeficient {
                smallest_singular_value: smallest,
            });
        }
    };
    // Cholesky can succeed on a numerically singular Gram matrix; check the
    // pivots when no ridge was requested.
    if ridge == 0.0 {
        let l = chol.l_dirty();
        let max_piv = (0..p).map(|i| l[(i, i)]).fold(0.0_f64, f64::max);
        let min_piv = (0..p).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_piv <= max_piv * 1e-12 {
            let eig = SymmetricEigen::new(reg.phi.tr_mul(&reg.phi) * scale).eigenvalues;
            return Err(EdmdError::RankDeficient {
                smallest_singular_value: eig.min().max(0.0).sqrt(),
            });
        }
    }
    let coeffs_t = chol.solve(&cross);
    let coeffs = coeffs_t.transpose();
    let a = coeffs.columns(0, n_psi).into_owned();
    let b = coeffs.columns(n_psi, n_u).into_owned();
    let mut model = KoopmanModel::new(a, b, spec.clone());
    model.ridge = ridge;
    Ok(model)
}

/// Least-squares objective `J(A, B)` on `data`.
pub fn edmd_objective(a: &DMatrix<f64>, b: &DMatrix<f64>, data: &SnapshotSet, spec: &LiftSpec) -> f64 {
    let reg = regression(data, spec);
    let n_psi = spec.n_psi();
    let pred = reg.phi.columns(0, n_psi) * a.transpose()
        + reg.phi.columns(n_psi, data.n_u()) * b.transpose();
    (reg.target - pred).norm_squared()
}

/// Root-mean-square one-step error in lifted coordinates.
pub fn one_step_rms(model: &KoopmanModel, data: &SnapshotSet) -> f64 {
    let j = edmd_objective(&model.a, &model.b, data, &model.lift);
    (j / (data.len() * model.n_psi()).max(1) as f64).sqrt()
}

/// RMS of the persistence predictor `ψ⁺ = ψ`, the trivial baseline.
pub fn persistence_rms(spec: &LiftSpec, data: &SnapshotSet) -> f64 {
    let psi = spec.lift_rows(&data.x);
    let target = spec.lift_rows(&data.x_plus);
    ((target - psi).norm_squared() / (data.len() * spec.n_psi()).max(1) as f64).sqrt()
}

/// Train and holdout fit quality for reporting.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitReport {
    pub train_rows: usize,
    pub holdout_rows: usize,
    pub train_rms: f64,
    pub holdout_rms: f64,
    pub holdout_persistence_rms: f64,
}

/// Fits on all but the last `holdout` fraction of trajectories and scores both parts.
pub fn fit_with_holdout(
    data: &SnapshotSet,
    spec: &LiftSpec,
    ridge: f64,
    holdout: f64,
) -> Result<(KoopmanModel, FitReport), EdmdError> {
    let (train, hold) = data.split_holdout(holdout);
    let model = fit_edmd(&train, spec, ridge)?;
    let report = FitReport {
        train_rows: train.len(),
        holdout_rows: hold.len(),
        train_rms: one_step_rms(&model, &train),
        holdout_rms: if hold.is_empty() { f64::NAN } else { one_step_rms(&model, &hold) },
        holdout_persistence_rms: if hold.is_empty() {
            f64::NAN
        } else {
            persistence_rms(spec, &hold)
        },
    };
    Ok((model, report))
}

