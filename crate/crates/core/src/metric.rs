//! Sphere metrics in conformal form `γ = r² e^{2φ} σ_o`, their curvature, and
//! the boundary data `(γ, H)`.

use std::f64::consts::PI;

use crate::error::{QsbError, Result};
use crate::field::ScalarField;

/// `γ = r² e^{2φ} σ_o`, always stored with `∫ e^{2φ} dμ_o = 4π`, so `r` is
/// the area radius.
#[derive(Debug, Clone)]
pub struct ConformalMetric {
    r: f64,
    phi: ScalarField,
}

impl ConformalMetric {
    /// Normalizes `(φ_raw, r_raw)` without changing the metric.
    pub fn new(phi_raw: ScalarField, r_raw: f64) -> Result<Self> {
        if !(r_raw > 0.0 && r_raw.is_finite()) {
            return Err(QsbError::ContractViolation(format!("radius {r_raw} must be positive")));
        }
        if phi_raw.values().iter().any(|v| !v.is_finite()) {
            return Err(QsbError::InvalidField("conformal factor is not finite".into()));
        }
        let a = phi_raw.map(|p| (2.0 * p).exp()).integrate() / (4.0 * PI);
        let shift = 0.5 * a.ln();
        // Already-normalized input is returned untouched, which makes the
        // normalization idempotent bit for bit.
        if shift.abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { r: r_raw, phi: phi_raw });
        }
        let phi = phi_raw.map(|p| p - shift);
        Ok(Self { r: r_raw * shift.exp(), phi })
    }

    pub fn round(grid: std::sync::Arc<crate::grid::SphereGrid>, r: f64) -> Self {
        Self { r, phi: ScalarField::constant(grid, 0.0) }
    }

    /// Area radius.
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn area(&self) -> f64 {
        self.r * self.r * self.phi.map(|p| (2.0 * p).exp()).integrate()
    }

    /// The same conformal factor with area radius `c·r`, i.e. `c²γ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { r: self.r * c, phi: self.phi.clone() }
    }

    /// `e^{2φ} r² K_γ = 1 − Δ_o φ`, the curvature of the area-`4π` metric
    /// times its conformal factor.
    pub fn normalized_curvature_density(&self) -> ScalarField {
        self.phi.laplacian().map(|l| 1.0 - l)
    }

    /// `K_γ = r⁻² e^{−2φ} (1 − Δ_o φ)`.
    pub fn gauss_curvature(&self) -> ScalarField {
        let r2 = self.r * self.r;
        self.normalized_curvature_density()
            .zip_map(&self.phi, |d, p| d * (-2.0 * p).exp() / r2)
    }

    /// `max K / min K` over grid nodes.
    pub fn kappa_ratio(&self) -> Result<f64> {
        let k = self.gauss_curvature();
        let min_k = k.min();
        if min_k <= 0.0 {
            return Err(QsbError::NonPositiveCurvature { min_k });
        }
        Ok(k.max() / min_k)
    }

    /// `∫ K dμ_γ`, which is `4π` by Gauss–Bonnet.
    pub fn total_curvature(&self) -> f64 {
        self.normalized_curvature_density().integrate()
    }
}

/// Bartnik data `(γ, H)` with `H > 0`.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    metric: ConformalMetric,
    h: ScalarField,
}

impl BoundaryData {
    pub fn new(metric: ConformalMetric, h: ScalarField) -> Result<Self> {
        let min_h = h.min();
        if !(min_h > 0.0) {
            return Err(QsbError::ContractViolation(format!(
                "mean curvature must be positive (min H = {min_h:e})"
            )));
        }
        if h.len() != metric.phi().len() {
            return Err(QsbError::InvalidField("H and φ live on different grids".into()));
        }
        Ok(Self { metric, h })
    }

    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }

    pub fn h(&self) -> &ScalarField {
        &self.h
    }

    /// `(c²γ, H/c)`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { metric: self.metric.scaled(c), h: self.h.scale(1.0 / c) }
    }

    /// `ℋ = (1/(8π r)) ∫ H dμ_γ`, dimensionless.
    pub fn cal_h(&self) -> f64 {
        let r = self.metric.r();
        let integrand = self.h.zip_map(self.metric.phi(), |h, p| h * (2.0 * p).exp());
        r * integrand.integrate() / (8.0 * PI)
    }
}
