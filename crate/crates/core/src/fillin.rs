//! Lower bound `Λ ≥ r^{n−1} √(min R / ((n−1)(n−2)))` on the normalized total
//! mean curvature of nonnegative-scalar-curvature fill-ins.

use serde::Serialize;

use crate::error::{QsbError, Result};
use crate::metric::ConformalMetric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FillinBound {
    pub n: usize,
    pub r: f64,
    #[serde(rename = "min_R")]
    pub min_r: f64,
    pub lambda_lower: f64,
}

pub fn lambda_lower_general(n: usize, r: f64, min_r: f64) -> Result<FillinBound> {
    if n < 3 {
        return Err(QsbError::ContractViolation(format!("dimension {n} must be at least 3")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(QsbError::ContractViolation(format!("radius {r} must be positive")));
    }
    if !(min_r >= 0.0 && min_r.is_finite()) {
        return Err(QsbError::ContractViolation(format!("min R = {min_r} must be nonnegative")));
    }
    let nf = n as f64;
    let lambda_lower = r.powi(n as i32 - 1) * (min_r / ((nf - 1.0) * (nf - 2.0))).sqrt();
    Ok(FillinBound { n, r, min_r, lambda_lower })
}

/// `n = 3` with `R = 2K`: `r² √(min K)`. Slightly negative `min K` from
/// rounding is clamped to zero.
pub fn lambda_lower_from_metric(m: &ConformalMetric) -> Result<FillinBound> {
    let min_k = m.gauss_curvature().min();
    if min_k < -1e-10 {
        return Err(QsbError::NegativeCurvature { min_k });
    }
    lambda_lower_general(3, m.r(), 2.0 * min_k.max(0.0))
}
