//! Constant-area conformal path from `r⁻²γ` to the round metric,
//!
//! `σ(t) = c(t)⁻¹ e^{2(1−t)φ} σ_o`,
//!
//! made volume-preserving by the gauge potential `ψ_t`
//! (`Δ_{σ(t)} ψ = −½ tr σ′`), together with the roundness functionals
//! `α(t) = ⅛ max |σ′ + 2 Hess_{σ(t)} ψ|²_{σ(t)}` and `β(t) = min K_{σ(t)}`.
//!
//! The diffeomorphisms generated by `X_t = ∇ψ_t` are never integrated:
//! everything is kept in the `σ(t)` frame.

use std::f64::consts::PI;

use crate::error::{QsbError, Result};
use crate::field::{CovectorField, ScalarField, SymTensorField};
use crate::metric::ConformalMetric;
use crate::numeric::{chebyshev_lobatto_unit, BaryInterp, Pchip};

/// Path data at one value of `t`. Tensors are in the `σ_o` orthonormal frame.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub c: f64,
    /// `d ln c / dt`.
    pub c_prime: f64,
    /// `σ(t) = e^{2w} σ_o`.
    pub w: ScalarField,
    pub k: ScalarField,
    pub psi: ScalarField,
    pub dpsi: CovectorField,
    /// `σ′(t) + L_{X_t} σ(t)`.
    pub d: SymTensorField,
    /// `|D|²_{σ(t)}` pointwise.
    pub d_norm_sq: ScalarField,
    pub alpha: f64,
    pub beta: f64,
    /// `‖tr_σ σ′ + 2Δ_σ ψ‖_∞`.
    pub gauge_residual: f64,
    /// `max |tr_σ D|`.
    pub trace_residual: f64,
    pub area: f64,
    /// `∫` of the gauge right-hand side before solving; zero up to rounding.
    pub solvability: f64,
}

/// Evaluates the path at `t`. Only the conformal factor of `m` enters, so
/// the result is independent of the area radius.
pub fn path_sample(m: &ConformalMetric, t: f64, gauge_tol: f64) -> Result<PathSample> {
    sample(m, t, gauge_tol, true)
}

/// As [`path_sample`], with `α` and `β` taken over the nodes only when
/// `refine` is false.
pub(crate) fn sample(m: &ConformalMetric, t: f64, gauge_tol: f64, refine: bool) -> Result<PathSample> {
    if !(0.0..=1.0).contains(&t) {
        return Err(QsbError::ContractViolation(format!("path parameter {t} outside [0, 1]")));
    }
    let phi = m.phi();
    let s = 1.0 - t;
    let e = phi.map(|p| (2.0 * s * p).exp());
    let int_e = e.integrate();
    let c = int_e / (4.0 * PI);
    let c_prime = -phi.zip_map(&e, |p, ev| 2.0 * p * ev).integrate() / int_e;
    let ln_c = c.ln();
    let w = phi.map(|p| s * p - 0.5 * ln_c);
    let e2w = w.map(|x| (2.0 * x).exp());

    // K_σ(t) = c e^{−2(1−t)φ} [t + (1−t)(1 − Δφ)]
    let density = m.normalized_curvature_density();
    let k = density.zip_map(&e, |d, ev| c / ev * (t + s * d));

    // Δ_o ψ = e^{2w} (2φ + c′)
    let g = phi.map(|p| 2.0 * p + c_prime);
    let rhs = e2w.zip_map(&g, |a, b| a * b);
    let solvability = rhs.integrate();
    let psi = rhs.inverse_laplacian();
    let lap_psi = psi.laplacian();

    // tr_σ σ′ + 2 Δ_σ ψ = −2(2φ + c′) + 2 e^{−2w} Δ_o ψ
    let gauge = {
        let n = psi.len();
        let v: Vec<f64> = (0..n)
            .map(|i| -2.0 * g.values()[i] + 2.0 * lap_psi.values()[i] / e2w.values()[i])
            .collect();
        v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    };
    if !(gauge <= gauge_tol) {
        return Err(QsbError::GaugeSolveFailed { t, residual: gauge, tol: gauge_tol });
    }

    // Hess_σ ψ = Hess_o ψ − (1−t)[dψ⊗dφ + dφ⊗dψ − ⟨dφ, dψ⟩ σ_o]
    let dpsi = psi.gradient();
    let dphi = phi.gradient();
    let hess_o = psi.hessian();
    let cross = dpsi.sym_product(&dphi);
    let inner = SymTensorField::conformal(&dpsi.dot(&dphi));
    let correction = cross.lin_comb(1.0, &inner, -1.0);
    let hess_sigma = hess_o.lin_comb(1.0, &correction, -s);

    // σ′ = −(2φ + c′) σ(t) = −(2φ + c′) e^{2w} σ_o
    let sigma_prime = SymTensorField::conformal(&rhs.scale(-1.0));
    let d = sigma_prime.lin_comb(1.0, &hess_sigma, 2.0);

    let d_norm_sq = d.norm_sq().zip_map(&w, |n, x| n * (-4.0 * x).exp());
    let (alpha, beta) = if refine {
        (d_norm_sq.interpolated_max() / 8.0, k.interpolated_min())
    } else {
        (d_norm_sq.max() / 8.0, k.min())
    };
    let trace_residual = d.trace().zip_map(&w, |tr, x| tr * (-2.0 * x).exp()).sup_norm();
    let area = e2w.integrate();

    if t > 0.0 && beta < -1e-8 {
        return Err(QsbError::PathCurvatureViolation { t, beta });
    }

    Ok(PathSample {
        t,
        c,
        c_prime,
        w,
        k,
        psi,
        dpsi,
        d,
        d_norm_sq,
        alpha,
        beta,
        gauge_residual: gauge,
        trace_residual,
        area,
        solvability,
    })
}

/// How `α` and `β` are interpolated between path nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Barycentric polynomial through all nodes; spectrally accurate on the
    /// Chebyshev node set.
    #[default]
    Chebyshev,
    /// Piecewise monotone cubic.
    MonotoneCubic,
}

impl Interpolation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Chebyshev => "chebyshev",
            Self::MonotoneCubic => "monotone_cubic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "chebyshev" => Some(Self::Chebyshev),
            "monotone_cubic" | "pchip" => Some(Self::MonotoneCubic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Interp {
    Bary(BaryInterp),
    Pchip(Pchip),
}

impl Interp {
    fn new(kind: Interpolation, x: &[f64], y: &[f64]) -> Self {
        match kind {
            Interpolation::Chebyshev => Self::Bary(BaryInterp::new(x.to_vec(), y.to_vec())),
            Interpolation::MonotoneCubic => Self::Pchip(Pchip::new(x.to_vec(), y.to_vec())),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Bary(b) => b.eval(t),
            Self::Pchip(p) => p.eval(t),
        }
    }
}

/// Sampled path. Synthetic tables carry `α`, `β` only; tables built from a
/// metric also keep the per-node fields.
#[derive(Debug, Clone)]
pub struct PathTable {
    t: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    interpolation: Interpolation,
    alpha_i: Interp,
    beta_i: Interp,
    samples: Vec<PathSample>,
}

impl PathTable {
    /// Table from raw `(t, α, β)` columns.
    pub fn from_profile(t: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        let n = t.len();
        if n < 2 || alpha.len() != n || beta.len() != n {
            return Err(QsbError::ContractViolation("path table columns must have equal length ≥ 2".into()));
        }
        if t[0] != 0.0 || t[n - 1] != 1.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QsbError::ContractViolation(
                "path nodes must increase strictly from 0 to 1".into(),
            ));
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) || alpha.iter().any(|&a| a < 0.0) {
            return Err(QsbError::ContractViolation("α must be finite and nonnegative, β finite".into()));
        }
        let alpha_i = Interp::new(interpolation, &t, &alpha);
        let beta_i = Interp::new(interpolation, &t, &beta);
        Ok(Self { t, alpha, beta, interpolation, alpha_i, beta_i, samples: Vec::new() })
    }

    /// Synthetic table on `n` Chebyshev nodes from closed-form `α`, `β`.
    pub fn from_functions(n: usize, alpha: impl Fn(f64) -> f64, beta: impl Fn(f64) -> f64) -> Result<Self> {
        let t = chebyshev_lobatto_unit(n);
        let a = t.iter().map(|&x| alpha(x)).collect();
        let b = t.iter().map(|&x| beta(x)).collect();
        Self::from_profile(t, a, b, Interpolation::Chebyshev)
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Interpolated `α(t)`, clipped at zero.
    pub fn alpha_at(&self, t: f64) -> f64 {
        self.alpha_i.eval(t).max(0.0)
    }

    /// Interpolated `β(t)`.
    pub fn beta_at(&self, t: f64) -> f64 {
        self.beta_i.eval(t)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Copy of the `α`, `β` profile without the per-node fields.
    pub fn without_samples(&self) -> Self {
        Self {
            t: self.t.clone(),
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            interpolation: self.interpolation,
            alpha_i: self.alpha_i.clone(),
            beta_i: self.beta_i.clone(),
            samples: Vec::new(),
        }
    }

    pub fn max_gauge_residual(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, s| a.max(s.gauge_residual))
    }
}

/// Samples the path at `n_nodes` Chebyshev–Lobatto points of `[0, 1]`.
pub fn build_path_table(m: &ConformalMetric, n_nodes: usize, gauge_tol: f64) -> Result<PathTable> {
    build_path_table_with(m, n_nodes, gauge_tol, Interpolation::default())
}

pub fn build_path_table_with(
    m: &ConformalMetric,
    n_nodes: usize,
    gauge_tol: f64,
    interpolation: Interpolation,
) -> Result<PathTable> {
    if n_nodes < 9 {
        return Err(QsbError::Config(format!("path needs at least 9 nodes, got {n_nodes}")));
    }
    let t = chebyshev_lobatto_unit(n_nodes);
    let samples = t
        .iter()
        .map(|&ti| path_sample(m, ti, gauge_tol))
        .collect::<Result<Vec<_>>>()?;
    let alpha = samples.iter().map(|s| s.alpha).collect();
    let beta = samples.iter().map(|s| s.beta).collect();
    let mut table = PathTable::from_profile(t, alpha, beta, interpolation)?;
    table.samples = samples;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Harmonics, SphereGrid};
    use std::sync::Arc;

    fn grid(l: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(l).unwrap())
    }

    fn metric(g: &Arc<SphereGrid>, terms: &[(usize, usize, f64)], r: f64) -> ConformalMetric {
        let mut h = Harmonics::zeros(g.degree());
        for &(l, m, a) in terms {
            h.set(l, m, a, 0.0);
        }
        ConformalMetric::new(ScalarField::from_harmonics(g.clone(), &h), r).unwrap()
    }

    #[test]
    fn round_path_is_constant() {
        let g = grid(8);
        let m = ConformalMetric::round(g, 1.0);
        for t in [0.0, 0.3, 1.0] {
            let s = path_sample(&m, t, 1e-10).unwrap();
            assert!((s.c - 1.0).abs() < 1e-15);
            assert!(s.psi.sup_norm() < 1e-15);
            assert!(s.alpha < 1e-28);
            assert!((s.beta - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoint_is_round() {
        let g = grid(8);
        let m = metric(&g, &[(2, 1, 0.2), (3, 0, 0.1)], 1.0);
        let s = path_sample(&m, 1.0, 1e-6).unwrap();
        assert!((s.c - 1.0).abs() < 1e-14);
        assert!(s.w.sup_norm() < 1e-14);
        assert!(s.k.map(|k| k - 1.0).sup_norm() < 1e-13);
        assert!((s.beta - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sample_invariants_hold() {
        let g = grid(12);
        let m = metric(&g, &[(2, 2, 0.2), (3, 1, -0.1), (1, 0, 0.1)], 1.0);
        for t in [0.0, 0.1, 0.5, 0.9] {
            let s = path_sample(&m, t, 1e-8).unwrap();
            assert!((s.area - 4.0 * PI).abs() < 1e-8);
            assert!(s.trace_residual < 1e-8, "{}", s.trace_residual);
            assert!(s.solvability.abs() < 1e-10);
            assert!(s.beta <= 1.0 + 1e-8);
            // Gauss–Bonnet for σ(t)
            let gb = s.k.zip_map(&s.w, |k, w| k * (2.0 * w).exp()).integrate();
            assert!((gb - 4.0 * PI).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_scales_quadratically() {
        let g = grid(8);
        for t in [0.0, 0.4, 0.8] {
            let a1 = path_sample(&metric(&g, &[(2, 2, 0.01)], 1.0), t, 1e-8).unwrap().alpha;
            let a2 = path_sample(&metric(&g, &[(2, 2, 0.02)], 1.0), t, 1e-8).unwrap().alpha;
            let q = a2 / a1;
            assert!((3.6..=4.4).contains(&q), "t = {t}: {q}");
        }
    }

    #[test]
    fn alpha_matches_first_order_formula() {
        // For φ = ε Y with ΔY = −λY, to first order ψ = −2εY/λ and
        // D = −2εY σ_o + 2 Hess ψ, independent of t.
        let g = grid(8);
        let eps = 1e-4;
        let m = metric(&g, &[(2, 2, eps)], 1.0);
        let s = path_sample(&m, 0.5, 1e-10).unwrap();
        let mut h = Harmonics::zeros(g.degree());
        h.set(2, 2, eps, 0.0);
        let y = ScalarField::from_harmonics(g.clone(), &h);
        let psi = y.scale(-2.0 / 6.0);
        let d_lin = SymTensorField::conformal(&y.scale(-2.0)).lin_comb(1.0, &psi.hessian(), 2.0);
        let a_lin = d_lin.norm_sq().interpolated_max() / 8.0;
        assert!((s.alpha - a_lin).abs() < 1e-3 * a_lin, "{} vs {a_lin}", s.alpha);
    }

    #[test]
    fn scaling_is_bitwise_invariant() {
        let g = grid(8);
        let m = metric(&g, &[(2, 1, 0.1)], 1.0);
        let a = build_path_table(&m, 9, 1e-6).unwrap();
        let b = build_path_table(&m.scaled(3.0), 9, 1e-6).unwrap();
        assert!(a.alpha().iter().zip(b.alpha()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.beta().iter().zip(b.beta()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn beta_lower_bound() {
        let g = grid(8);
        let m = metric(&g, &[(2, 0, 0.15), (3, 2, 0.1)], 1.0);
        let norm = m.phi().sup_norm();
        let k_minus = m
            .normalized_curvature_density()
            .zip_map(m.phi(), |d, p| d * (-2.0 * p).exp())
            .min()
            .max(0.0);
        let table = build_path_table(&m, 17, 1e-6).unwrap();
        for (t, b) in table.t().iter().zip(table.beta()) {
            let lb = (-4.0 * (1.0 - t) * norm).exp() * (t + (1.0 - t) * k_minus * (-2.0 * norm).exp());
            assert!(*b >= lb - 1e-8, "t = {t}: β = {b}, bound {lb}");
        }
    }

    #[test]
    fn rejects_few_nodes_and_bad_t() {
        let g = grid(4);
        let m = ConformalMetric::round(g, 1.0);
        assert!(matches!(build_path_table(&m, 5, 1e-8), Err(QsbError::Config(_))));
        assert!(path_sample(&m, 1.5, 1e-8).is_err());
    }

    #[test]
    fn gauge_failure_is_reported() {
        let g = grid(4);
        let m = metric(&g, &[(4, 3, 0.3), (2, 0, 0.2)], 1.0);
        assert!(matches!(path_sample(&m, 0.2, 1e-15), Err(QsbError::GaugeSolveFailed { .. })));
    }
}
