//! JSON problem files.
//!
//! ```json
//! {"n": 2, "hessian": {"dense": [2, 0, 0, 2]}, "h": [1, -3], "epsilon": 1e-6}
//! {"n": 3, "hessian": {"koopman": {"F": [...], "input_block": [...],
//!                                  "state_diag": [...], "rho": 100}},
//!  "h": [...], "epsilon": 1e-6}
//! ```
//!
//! Matrices are row-major; either a flat array or an array of rows is
//! accepted. Output always uses the flat form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::{BoxQpProblem, HessianForm, KoopmanHessian};
use super::solver::DEFAULT_EPSILON;
use super::SolverError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixData {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixData {
    fn into_matrix(self, rows: usize, cols: usize, name: &str) -> Result<DMatrix<f64>, SolverError> {
        let flat = match self {
            MatrixData::Flat(v) => v,
            MatrixData::Rows(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(SolverError::Dimension(format!(
                        "{name} must have {rows} rows of length {cols}"
                    )));
                }
                r.concat()
            }
        };
        if flat.len() != rows * cols {
            return Err(SolverError::Dimension(format!(
                "{name} has {} entries, expected {rows}x{cols} = {}",
                flat.len(),
                rows * cols
            )));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &flat))
    }

    fn len(&self) -> usize {
        match self {
            MatrixData::Flat(v) => v.len(),
            MatrixData::Rows(r) => r.iter().map(Vec::len).sum(),
        }
    }
}

pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KoopmanHessianFile {
    #[serde(rename = "F")]
    pub f: MatrixData,
    pub input_block: MatrixData,
    pub state_diag: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum HessianFile {
    Dense(MatrixData),
    Koopman(KoopmanHessianFile),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemFile {
    pub n: usize,
    pub hessian: HessianFile,
    pub h: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn isqrt_exact(len: usize, name: &str) -> Result<usize, SolverError> {
    let r = (len as f64).sqrt().round() as usize;
    if r * r != len {
        return Err(SolverError::Dimension(format!(
            "{name} has {len} entries, which is not a square"
        )));
    }
    Ok(r)
}

impl ProblemFile {
    pub fn from_problem(problem: &BoxQpProblem, epsilon: f64) -> Self {
        let hessian = match problem.hessian() {
            HessianForm::Dense(m) => HessianFile::Dense(MatrixData::Flat(row_major(m))),
            HessianForm::KoopmanStructured(k) => HessianFile::Koopman(KoopmanHessianFile {
                f: MatrixData::Flat(row_major(&k.f)),
                input_block: MatrixData::Flat(row_major(&k.input_block)),
                state_diag: k.state_diag.iter().copied().collect(),
                rho: k.rho,
            }),
        };
        Self {
            n: problem.n(),
            hessian,
            h: problem.h().iter().copied().collect(),
            epsilon,
        }
    }

    pub fn into_problem(self) -> Result<(BoxQpProblem, f64), SolverError> {
        let n = self.n;
        let hessian = match self.hessian {
            HessianFile::Dense(m) => HessianForm::Dense(m.into_matrix(n, n, "hessian.dense")?),
            HessianFile::Koopman(k) => {
                let nu = isqrt_exact(k.input_block.len(), "input_block")?;
                let nx = k.state_diag.len();
                if nu + nx != n {
                    return Err(SolverError::Dimension(format!(
                        "input ({nu}) plus state ({nx}) dimensions do not sum to n = {n}"
                    )));
                }
                HessianForm::KoopmanStructured(KoopmanHessian {
                    f: k.f.into_matrix(nx, nu, "F")?,
                    input_block: k.input_block.into_matrix(nu, nu, "input_block")?,
                    state_diag: DVector::from_vec(k.state_diag),
                    rho: k.rho,
                })
            }
        };
        if self.h.len() != n {
            return Err(SolverError::Dimension(format!(
                "h has length {}, expected n = {n}",
                self.h.len()
            )));
        }
        let problem = BoxQpProblem::new(hessian, DVector::from_vec(self.h))?;
        Ok((problem, self.epsilon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dense_nested_and_flat() {
        let flat = r#"{"n":2,"hessian":{"dense":[2,0,0,3]},"h":[1,1],"epsilon":1e-7}"#;
        let nested = r#"{"n":2,"hessian":{"dense":[[2,0],[0,3]]},"h":[1,1]}"#;
        let (a, eps) = serde_json::from_str::<ProblemFile>(flat).unwrap().into_problem().unwrap();
        let (b, eps_b) = serde_json::from_str::<ProblemFile>(nested).unwrap().into_problem().unwrap();
        assert_eq!(eps, 1e-7);
        assert_eq!(eps_b, DEFAULT_EPSILON);
        assert_eq!(a.hessian().to_dense(), b.hessian().to_dense());
        assert_eq!(a.hessian().to_dense()[(1, 1)], 3.0);
    }

    #[test]
    fn koopman_round_trip() {
        let k = KoopmanHessian {
            f: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, -0.2, 0.3]),
            input_block: DMatrix::from_row_slice(2, 2, &[0.3, -0.1, -0.1, 0.2]),
            state_diag: DVector::from_vec(vec![1.0, 2.0, 0.5]),
            rho: 10.0,
        };
        let p = BoxQpProblem::new(
            HessianForm::KoopmanStructured(k),
            DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5]),
        )
        .unwrap();
        let text = serde_json::to_string(&ProblemFile::from_problem(&p, 1e-6)).unwrap();
        let (back, _) = serde_json::from_str::<ProblemFile>(&text).unwrap().into_problem().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn dimension_errors() {
        let bad = r#"{"n":3,"hessian":{"dense":[1,0,0,1]},"h":[1,1,1]}"#;
        let err = serde_json::from_str::<ProblemFile>(bad).unwrap().into_problem().unwrap_err();
        assert!(matches!(err, SolverError::Dimension(_)));
    }
}
