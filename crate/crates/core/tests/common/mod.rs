#![allow(dead_code)]

use std::sync::Arc;

use qsb_core::{BoundaryData, ConformalMetric, Harmonics, ScalarField, SphereGrid};

pub fn grid(l: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(l).unwrap())
}

pub fn round(l: usize, r: f64, h: f64) -> BoundaryData {
    let g = grid(l);
    BoundaryData::new(ConformalMetric::round(g.clone(), r), ScalarField::constant(g, h)).unwrap()
}

/// `H ≡ 2√(1 − 2m)` on the unit round sphere.
pub fn schwarzschild(l: usize, m: f64) -> BoundaryData {
    round(l, 1.0, 2.0 * (1.0 - 2.0 * m).sqrt())
}

/// `v(s) = (1 + (H²/4 − 1)/s)^{−1/2}`, from `y = v⁻²`, `y′ = (1 − y)/s`.
pub fn schwarzschild_v(h: f64, s: f64) -> f64 {
    (1.0 + (h * h / 4.0 - 1.0) / s).powf(-0.5)
}

/// `φ = ε Re Y_{2,2}`.
pub fn phi_y22(g: &Arc<SphereGrid>, eps: f64) -> ScalarField {
    let mut h = Harmonics::zeros(g.degree());
    h.add_complex(2, 2, eps, 0.0);
    ScalarField::from_harmonics(g.clone(), &h)
}

/// Metric `φ = ε Re Y_{2,2}`, `r = 1`, with `H = 2 + h_var cos θ`.
pub fn perturbed(l: usize, eps: f64, h_var: f64) -> BoundaryData {
    let g = grid(l);
    let m = ConformalMetric::new(phi_y22(&g, eps), 1.0).unwrap();
    let h = ScalarField::from_fn(g, |t, _| 2.0 + h_var * t.cos());
    BoundaryData::new(m, h).unwrap()
}

/// Band-limited field with coefficients for `1 ≤ l ≤ l_max` drawn from
/// `coeff(l)`, rescaled to sup norm `sup`.
pub fn random_phi(g: &Arc<SphereGrid>, l_max: usize, sup: f64, mut coeff: impl FnMut(usize) -> f64) -> ScalarField {
    let mut h = Harmonics::zeros(g.degree());
    for l in 1..=l_max {
        for m in 0..=l {
            h.set(l, m, coeff(l), if m == 0 { 0.0 } else { coeff(l) });
        }
    }
    let f = ScalarField::from_harmonics(g.clone(), &h);
    let n = f.sup_norm();
    f.scale(sup / n)
}

/// Curvature of `e^{2φ}σ_o`.
pub fn curvature(phi: &ScalarField) -> ScalarField {
    phi.laplacian().zip_map(phi, |l, p| (1.0 - l) * (-2.0 * p).exp())
}
