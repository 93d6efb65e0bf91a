use super::SolverError;

/// Constant in the per-iteration contraction `(1 - 0.2348/√(2n))²` of the
/// duality measure.
pub const CONTRACTION_CONSTANT: f64 = 0.2348;

/// Neighborhood radius β of the central-path neighborhood N(β).
pub const NEIGHBORHOOD_BETA: f64 = 0.25;

/// Guaranteed per-iteration factor on the duality measure for dimension `n`.
pub fn contraction_factor(n: usize) -> f64 {
    let r = 1.0 - CONTRACTION_CONSTANT / (2.0 * n as f64).sqrt();
    r * r
}

/// Worst-case iteration count to reach `vᵀs ≤ epsilon` from the cold start.
///
/// `⌈ ln(2n/ε) / (−2 ln(1 − 0.2348/√(2n))) ⌉`, data independent.
pub fn certified_iteration_bound(n: usize, epsilon: f64) -> Result<usize, SolverError> {
    if n == 0 {
        return Err(SolverError::Dimension("problem dimension is zero".into()));
    }
    let two_n = 2.0 * n as f64;
    if !(epsilon > 0.0 && epsilon < two_n) {
        return Err(SolverError::InvalidTolerance { epsilon, n });
    }
    let num = (two_n / epsilon).ln();
    let den = -2.0 * (1.0 - CONTRACTION_CONSTANT / two_n.sqrt()).ln();
    Ok((num / den).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdv_size_bound() {
        assert_eq!(certified_iteration_bound(1040, 1e-6).unwrap(), 2079);
    }

    #[test]
    fn single_contraction_closes_gap() {
        // ε = 2n·(1−c/√2)² makes the ratio exactly one for n = 1.
        let eps = 2.0 * contraction_factor(1);
        assert_eq!(certified_iteration_bound(1, eps).unwrap(), 1);
    }

    #[test]
    fn half_size_bound_matches_high_precision_value() {
        // 50-digit evaluation of the bound gives 1420.6337045380479...
        assert_eq!(certified_iteration_bound(520, 1e-6).unwrap(), 1421);
    }

    #[test]
    fn rejects_out_of_range_tolerance() {
        assert!(certified_iteration_bound(4, 0.0).is_err());
        assert!(certified_iteration_bound(4, -1.0).is_err());
        assert!(certified_iteration_bound(4, 8.0).is_err());
        assert!(certified_iteration_bound(4, f64::NAN).is_err());
        assert!(certified_iteration_bound(0, 1e-6).is_err());
    }

    #[test]
    fn bound_grows_with_dimension_and_precision() {
        let a = certified_iteration_bound(10, 1e-6).unwrap();
        let b = certified_iteration_bound(100, 1e-6).unwrap();
        let c = certified_iteration_bound(100, 1e-9).unwrap();
        assert!(a < b && b < c);
    }
}
