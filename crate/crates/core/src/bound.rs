//! Mass bounds evaluated on a [`PathTable`]:
//!
//! * `ζ̂ = ∫₀¹ √(α / 4β) dt`, the roundness of the conformal path;
//! * the general bound for a reparameterization `s(t)`,
//!   `(r/2)[s(1) − ∫₀¹ β s′ e^{−∫_t¹ αs/s′} dt − e^{−∫₀¹ αs/s′} ℋ²]`;
//! * the closed form `(r/2)[(1 + ζ̂ℋ)² − ℋ²]` and the limit `r/2`;
//! * a direct search over low-dimensional reparameterization families.
//!
//! Every `t`-integral is taken in `τ = √t` with composite Gauss panels,
//! which absorbs the `t^{−1/2}` behaviour allowed at `t = 0` when `β(0) = 0`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QsbError, Result};
use crate::metric::BoundaryData;
use crate::numeric::{chebyshev_lobatto_unit, golden_section, BaryInterp, GaussRule};
use crate::path::PathTable;

/// Composite Gauss rule in `τ = √t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    pub panels: usize,
    pub order: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { panels: 32, order: 10 }
    }
}

impl Quadrature {
    /// Panel edges in `τ`, refined so that every `t`-breakpoint is an edge.
    fn edges(&self, breakpoints: &[f64]) -> Vec<f64> {
        let mut e: Vec<f64> = (0..=self.panels).map(|i| i as f64 / self.panels as f64).collect();
        e.extend(breakpoints.iter().filter(|&&t| t > 0.0 && t < 1.0).map(|t| t.sqrt()));
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        e
    }
}

fn zeta_integrand(table: &PathTable, t: f64) -> Result<f64> {
    let a = table.alpha_at(t);
    if a == 0.0 {
        return Ok(0.0);
    }
    let b = table.beta_at(t);
    if !(b > 0.0) {
        return Err(QsbError::NonIntegrableZeta { t, beta: b });
    }
    Ok((a / (4.0 * b)).sqrt())
}

fn check_interior_beta(table: &PathTable) -> Result<()> {
    for (&t, &b) in table.t().iter().zip(table.beta()) {
        if t > 0.0 && b <= 0.0 {
            return Err(QsbError::NonIntegrableZeta { t, beta: b });
        }
    }
    Ok(())
}

/// `∫_{τ_a}^{τ_b} √(α/4β)(τ²) 2τ dτ`.
fn zeta_piece(table: &PathTable, rule: &GaussRule, ta: f64, tb: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (tau, w) in rule.on(ta, tb) {
        acc += w * 2.0 * tau * zeta_integrand(table, tau * tau)?;
    }
    Ok(acc)
}

/// `ζ̂ = ∫₀¹ √(α(t) / 4β(t)) dt`.
pub fn zeta_upper(table: &PathTable) -> Result<f64> {
    zeta_upper_with(table, Quadrature::default())
}

pub fn zeta_upper_with(table: &PathTable, quad: Quadrature) -> Result<f64> {
    check_interior_beta(table)?;
    let rule = GaussRule::new(quad.order);
    let edges = quad.edges(&[]);
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += zeta_piece(table, &rule, w[0], w[1])?;
    }
    Ok(total)
}

/// Reparameterization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `s = (1 + k Z(t))²`, `Z(t) = ∫₀ᵗ √(α/4β)`.
    OdeSqrt,
    /// `s = 1 + k ∫₀ᵗ φ`, `φ` piecewise constant on equal pieces.
    AffineDensity,
    /// `s` piecewise linear through increasing knot values on equal pieces.
    PiecewiseLinear,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OdeSqrt => "ode_sqrt",
            Self::AffineDensity => "affine_density",
            Self::PiecewiseLinear => "piecewise_linear",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "ode_sqrt" => Some(Self::OdeSqrt),
            "affine_density" => Some(Self::AffineDensity),
            "piecewise_linear" => Some(Self::PiecewiseLinear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    OdeSqrt {
        k: f64,
        /// `Z` as a function of `τ = √t`.
        z: BaryInterp,
        table: PathTable,
    },
    AffineDensity {
        k: f64,
        density: Vec<f64>,
        /// `∫₀^{j/n} φ` at the piece edges.
        cumulative: Vec<f64>,
    },
    PiecewiseLinear {
        knots: Vec<f64>,
    },
}

/// A monotone `s(t)` on `[0, 1]` with `s(0) = 1`.
#[derive(Debug, Clone)]
pub struct Reparameterization {
    kind: Kind,
    b: f64,
}

const Z_NODES: usize = 65;

impl Reparameterization {
    /// The ODE choice `β s′ = k² α s / s′`, i.e. `s = (1 + k Z(t))²`.
    pub fn ode_sqrt(table: &PathTable, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(QsbError::InvalidReparameterization(format!("k = {k} must be positive")));
        }
        check_interior_beta(table)?;
        let quad = Quadrature::default();
        let rule = GaussRule::new(quad.order);
        let tau = chebyshev_lobatto_unit(Z_NODES);
        let mut z = vec![0.0; Z_NODES];
        for j in 1..Z_NODES {
            z[j] = z[j - 1] + zeta_piece(table, &rule, tau[j - 1], tau[j])?;
        }
        let b = (1.0 + k * z[Z_NODES - 1]).powi(2);
        Ok(Self {
            kind: Kind::OdeSqrt { k, z: BaryInterp::new(tau, z), table: table.without_samples() },
            b,
        })
    }

    /// `s = 1 + k ∫₀ᵗ φ` with `φ` constant on each of `density.len()` equal
    /// pieces.
    pub fn affine_density(k: f64, density: Vec<f64>) -> Result<Self> {
        if !(k > 0.0) || density.is_empty() || density.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(QsbError::InvalidReparameterization(
                "affine density needs k > 0 and a positive density".into(),
            ));
        }
        let n = density.len() as f64;
        let mut cumulative = vec![0.0];
        for d in &density {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + d / n);
        }
        let b = 1.0 + k * cumulative[density.len()];
        Ok(Self { kind: Kind::AffineDensity { k, density, cumulative }, b })
    }

    /// `s = 1 + k t`.
    pub fn affine(k: f64) -> Result<Self> {
        Self::affine_density(k, vec![1.0])
    }

    /// Piecewise-linear `s` through `(j/n, knots[j])`, `knots[0] = 1`.
    pub fn piecewise_linear(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != 1.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(QsbError::InvalidReparameterization(
                "piecewise-linear knots must start at 1 and increase strictly".into(),
            ));
        }
        let b = *knots.last().unwrap();
        Ok(Self { kind: Kind::PiecewiseLinear { knots }, b })
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::OdeSqrt { .. } => Family::OdeSqrt,
            Kind::AffineDensity { .. } => Family::AffineDensity,
            Kind::PiecewiseLinear { .. } => Family::PiecewiseLinear,
        }
    }

    /// Family parameters: `[k]`, `[k, φ…]` or the knot values.
    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            Kind::OdeSqrt { k, .. } => vec![*k],
            Kind::AffineDensity { k, density, .. } => {
                let mut p = vec![*k];
                p.extend_from_slice(density);
                p
            }
            Kind::PiecewiseLinear { knots } => knots.clone(),
        }
    }

    /// `b = s(1)`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Points in `(0, 1)` where `s′` may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = match &self.kind {
            Kind::OdeSqrt { .. } => return Vec::new(),
            Kind::AffineDensity { density, .. } => density.len(),
            Kind::PiecewiseLinear { knots } => knots.len() - 1,
        };
        (1..n).map(|j| j as f64 / n as f64).collect()
    }

    fn piece(n: usize, t: f64) -> usize {
        ((t * n as f64).floor() as usize).min(n - 1)
    }

    pub fn s(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::OdeSqrt { k, z, .. } => (1.0 + k * z.eval(t.max(0.0).sqrt())).powi(2),
            Kind::AffineDensity { k, density, cumulative } => {
                let n = density.len();
                let j = Self::piece(n, t);
                1.0 + k * (cumulative[j] + density[j] * (t - j as f64 / n as f64))
            }
            Kind::PiecewiseLinear { knots } => {
                let n = knots.len() - 1;
                let j = Self::piece(n, t);
                let slope = (knots[j + 1] - knots[j]) * n as f64;
                knots[j] + slope * (t - j as f64 / n as f64)
            }
        }
    }

    /// `s′(t)`; right derivative at breakpoints.
    pub fn s_prime(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::OdeSqrt { k, z, table } => {
                let g = zeta_integrand(table, t).unwrap_or(f64::INFINITY);
                2.0 * k * (1.0 + k * z.eval(t.max(0.0).sqrt())) * g
            }
            Kind::AffineDensity { k, density, .. } => k * density[Self::piece(density.len(), t)],
            Kind::PiecewiseLinear { knots } => {
                let n = knots.len() - 1;
                let j = Self::piece(n, t);
                (knots[j + 1] - knots[j]) * n as f64
            }
        }
    }

    /// `t(s)` for `s ∈ [1, b]` by bisection on the monotone `s(t)`; `1`
    /// beyond `b`.
    pub fn t_of_s(&self, s: f64) -> f64 {
        if s <= 1.0 {
            return 0.0;
        }
        if s >= self.b {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.s(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `t′(s) = 1 / s′(t(s))` for `s < b`, zero beyond.
    pub fn t_prime(&self, s: f64) -> f64 {
        if s >= self.b {
            return 0.0;
        }
        1.0 / self.s_prime(self.t_of_s(s))
    }

    /// Checks `s′ > 0` on a fine sample of `[0, 1]` and `b > 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 1.0) {
            return Err(QsbError::InvalidReparameterization(format!("b = {} must exceed 1", self.b)));
        }
        for i in 0..=256 {
            let t = i as f64 / 256.0;
            let d = self.s_prime(t);
            if !(d > 0.0) {
                return Err(QsbError::InvalidReparameterization(format!("s'({t}) = {d} is not positive")));
            }
        }
        Ok(())
    }
}

/// Right-hand side of the general bound, in units of `r/2`.
fn general_bracket(table: &PathTable, rep: &Reparameterization, cal_h: f64, quad: Quadrature) -> Result<f64> {
    let rule = GaussRule::new(quad.order);
    let edges = quad.edges(&rep.breakpoints());

    // α s / s′ in τ, including the 2τ Jacobian.
    let q = |tau: f64| -> Result<f64> {
        let t = tau * tau;
        let a = table.alpha_at(t);
        if a == 0.0 {
            return Ok(0.0);
        }
        let sp = rep.s_prime(t);
        if !(sp > 0.0) {
            return Err(QsbError::InvalidReparameterization(format!("s'({t}) = {sp} with α > 0")));
        }
        Ok(a * rep.s(t) / sp * 2.0 * tau)
    };

    let np = edges.len() - 1;
    // Integral of q over each panel and the tail sums E at panel left edges.
    let mut panel_q = vec![0.0; np];
    for p in 0..np {
        for (tau, w) in rule.on(edges[p], edges[p + 1]) {
            panel_q[p] += w * q(tau)?;
        }
    }
    let mut tail = vec![0.0; np + 1];
    for p in (0..np).rev() {
        tail[p] = tail[p + 1] + panel_q[p];
    }

    let mut inner = 0.0;
    for p in 0..np {
        let right = edges[p + 1];
        for (tau, w) in rule.on(edges[p], right) {
            let t = tau * tau;
            let mut e = tail[p + 1];
            for (x, v) in rule.on(tau, right) {
                e += v * q(x)?;
            }
            let beta = table.beta_at(t);
            let sp = rep.s_prime(t);
            let f = beta * sp * 2.0 * tau;
            if f != 0.0 {
                inner += w * f * (-e).exp();
            }
        }
    }
    Ok(rep.b() - inner - (-tail[0]).exp() * cal_h * cal_h)
}

/// General bound for a given `s(t)`, in mass units.
pub fn bound_general(table: &PathTable, rep: &Reparameterization, b: &BoundaryData) -> Result<f64> {
    bound_general_with(table, rep, b, Quadrature::default())
}

pub fn bound_general_with(
    table: &PathTable,
    rep: &Reparameterization,
    b: &BoundaryData,
    quad: Quadrature,
) -> Result<f64> {
    let r = b.metric().r();
    Ok(0.5 * r * general_bracket(table, rep, b.cal_h(), quad)?)
}

/// `(r/2)[(1 + ζ̂ℋ)² − ℋ²]`.
pub fn theorem_formula(r: f64, zeta: f64, cal_h: f64) -> f64 {
    0.5 * r * ((1.0 + zeta * cal_h).powi(2) - cal_h * cal_h)
}

#[derive(Debug, Clone)]
pub struct TheoremBound {
    pub value: f64,
    pub zeta: f64,
    pub cal_h: f64,
    /// `s = (1 + ℋ Z(t))²`, which realizes the closed form.
    pub reparam: Reparameterization,
}

pub fn bound_theorem(table: &PathTable, b: &BoundaryData) -> Result<TheoremBound> {
    let zeta = zeta_upper(table)?;
    let cal_h = b.cal_h();
    let value = theorem_formula(b.metric().r(), zeta, cal_h);
    let reparam = Reparameterization::ode_sqrt(table, cal_h)?;
    Ok(TheoremBound { value, zeta, cal_h, reparam })
}

/// The `k → 0` limit of the affine-density bound.
pub fn bound_half_r(b: &BoundaryData) -> f64 {
    0.5 * b.metric().r()
}

/// Outcome of [`optimize_s`].
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub bound: f64,
    /// `"theorem"`, `"half_r_limit"`, or the searched family name.
    pub label: String,
    pub params: Vec<f64>,
    pub reparam: Option<Reparameterization>,
    pub bound_theorem: f64,
    pub bound_half_r: f64,
    /// Best value found inside the family alone.
    pub family_best: f64,
    pub evaluations: usize,
}

const AFFINE_PIECES: usize = 4;
const LINEAR_PIECES: usize = 6;
const LOG_K_RANGE: (f64, f64) = (-9.0, 4.0);

struct Search<'a> {
    table: &'a PathTable,
    cal_h: f64,
    evals: usize,
    best: f64,
    best_rep: Option<Reparameterization>,
}

impl Search<'_> {
    fn eval(&mut self, rep: Result<Reparameterization>) -> f64 {
        self.evals += 1;
        let Ok(rep) = rep else { return f64::INFINITY };
        if rep.family() != Family::OdeSqrt && rep.validate().is_err() {
            return f64::INFINITY;
        }
        match general_bracket(self.table, &rep, self.cal_h, Quadrature::default()) {
            Ok(v) if v.is_finite() => {
                // Ties keep the earlier candidate, which fixes the order.
                if v < self.best {
                    self.best = v;
                    self.best_rep = Some(rep);
                }
                v
            }
            _ => f64::INFINITY,
        }
    }
}

fn affine_from(x: &[f64]) -> Result<Reparameterization> {
    Reparameterization::affine_density(x[0].exp(), x[1..].iter().map(|v| v.exp()).collect())
}

fn linear_from(x: &[f64]) -> Result<Reparameterization> {
    let mut knots = vec![1.0];
    for v in x {
        let last = *knots.last().unwrap();
        knots.push(last + v.exp());
    }
    Reparameterization::piecewise_linear(knots)
}

/// Cyclic coordinate descent with golden-section line searches on a
/// bracket of half-width `radius` around the current point.
fn coordinate_descent(
    search: &mut Search,
    build: fn(&[f64]) -> Result<Reparameterization>,
    mut x: Vec<f64>,
    budget: usize,
) {
    let mut fx = search.eval(build(&x));
    let mut radius = 2.0;
    let per_line = 10;
    while search.evals + per_line <= budget && radius > 1e-6 {
        let mut improved = false;
        for i in 0..x.len() {
            if search.evals + per_line > budget {
                break;
            }
            let center = x[i];
            let (xi, fi) = golden_section(
                |v| {
                    let mut y = x.clone();
                    y[i] = v;
                    search.eval(build(&y))
                },
                center - radius,
                center + radius,
                per_line,
            );
            if fi < fx {
                x[i] = xi;
                fx = fi;
                improved = true;
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
}

/// Searches `family` for the smallest general bound using at most
/// `budget` bound evaluations. The result never exceeds
/// `min(bound_theorem, r/2)`: both are kept as candidates.
pub fn optimize_s(table: &PathTable, b: &BoundaryData, family: Family, budget: usize) -> Result<OptimizeResult> {
    let theorem = bound_theorem(table, b)?;
    let half_r = bound_half_r(b);
    let r = b.metric().r();
    let mut search = Search { table, cal_h: theorem.cal_h, evals: 0, best: f64::INFINITY, best_rep: None };

    match family {
        Family::OdeSqrt => {
            let cal_h = theorem.cal_h;
            let _ = golden_section(
                |u| search.eval(Reparameterization::ode_sqrt(table, u.exp())),
                LOG_K_RANGE.0,
                LOG_K_RANGE.1,
                budget.max(2),
            );
            // The closed-form choice k = ℋ is always evaluated too.
            search.eval(Reparameterization::ode_sqrt(table, cal_h));
        }
        Family::AffineDensity => {
            let mut x = vec![theorem.cal_h.max(1e-3).ln()];
            x.extend(std::iter::repeat(0.0).take(AFFINE_PIECES));
            coordinate_descent(&mut search, affine_from, x, budget);
        }
        Family::PiecewiseLinear => {
            let step = (theorem.reparam.b() - 1.0).max(0.1) / LINEAR_PIECES as f64;
            let x = vec![step.ln(); LINEAR_PIECES];
            coordinate_descent(&mut search, linear_from, x, budget);
        }
    }

    let family_best = 0.5 * r * search.best;
    let mut out = OptimizeResult {
        bound: family_best,
        label: family.name().to_string(),
        params: search.best_rep.as_ref().map(|p| p.params()).unwrap_or_default(),
        reparam: search.best_rep.clone(),
        bound_theorem: theorem.value,
        bound_half_r: half_r,
        family_best,
        evaluations: search.evals,
    };
    if theorem.value < out.bound {
        out.bound = theorem.value;
        out.label = "theorem".into();
        out.params = theorem.reparam.params();
        out.reparam = Some(theorem.reparam.clone());
    }
    if half_r < out.bound {
        out.bound = half_r;
        out.label = "half_r_limit".into();
        out.params = Vec::new();
        out.reparam = None;
    }
    Ok(out)
}

/// Summary of all bounds for one boundary datum. Serializes to the report
/// keys, in this order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MassBoundReport {
    pub r_gamma: f64,
    pub area: f64,
    pub kappa: Option<f64>,
    pub zeta_upper: f64,
    #[serde(rename = "calH")]
    pub cal_h: f64,
    pub bound_theorem: f64,
    pub bound_half_r: f64,
    pub bound_best: f64,
    pub best_family: String,
    pub best_params: Vec<f64>,
    pub extension_mass: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl MassBoundReport {
    /// Runs `ζ̂`, the closed forms and the search over `family`.
    pub fn compute(b: &BoundaryData, table: &PathTable, family: Family, budget: usize) -> Result<(Self, OptimizeResult)> {
        let zeta = zeta_upper(table)?;
        let opt = optimize_s(table, b, family, budget)?;
        let m = b.metric();
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("family_best".into(), opt.family_best);
        diagnostics.insert("evaluations".into(), opt.evaluations as f64);
        diagnostics.insert("max_gauge_residual".into(), table.max_gauge_residual());
        let report = Self {
            r_gamma: m.r(),
            area: m.area(),
            kappa: m.kappa_ratio().ok(),
            zeta_upper: zeta,
            cal_h: b.cal_h(),
            bound_theorem: opt.bound_theorem,
            bound_half_r: opt.bound_half_r,
            bound_best: opt.bound,
            best_family: opt.label.clone(),
            best_params: opt.params.clone(),
            extension_mass: None,
            tolerances: BTreeMap::new(),
            diagnostics,
        };
        Ok((report, opt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::grid::SphereGrid;
    use crate::metric::ConformalMetric;
    use std::sync::Arc;

    fn round_data(h: f64, r: f64) -> BoundaryData {
        let g = Arc::new(SphereGrid::new(4).unwrap());
        BoundaryData::new(ConformalMetric::round(g.clone(), r), ScalarField::constant(g, h)).unwrap()
    }

    fn round_table() -> PathTable {
        PathTable::from_functions(9, |_| 0.0, |_| 1.0).unwrap()
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta_upper(&round_table()).unwrap(), 0.0);
        let t = PathTable::from_functions(9, |t| t * t, |_| 1.0).unwrap();
        assert!((zeta_upper(&t).unwrap() - 0.25).abs() < 1e-8);
        let t = PathTable::from_functions(9, |_| 1.0, |t| t).unwrap();
        assert!((zeta_upper(&t).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zeta_rejects_interior_nonpositive_beta() {
        let t = PathTable::from_functions(9, |_| 1.0, |t| t - 0.5).unwrap();
        assert!(matches!(zeta_upper(&t), Err(QsbError::NonIntegrableZeta { .. })));
    }

    #[test]
    fn round_bound_is_rep_independent() {
        let m: f64 = 0.25;
        let b = round_data(2.0 * (1.0 - 2.0 * m).sqrt(), 1.0);
        let table = round_table();
        let h2 = b.cal_h().powi(2);
        for rep in [
            Reparameterization::affine(1.0).unwrap(),
            Reparameterization::affine_density(0.3, vec![1.0, 3.0, 0.5]).unwrap(),
            Reparameterization::piecewise_linear(vec![1.0, 1.5, 4.0]).unwrap(),
        ] {
            let v = bound_general(&table, &rep, &b).unwrap();
            assert!((v - 0.5 * (1.0 - h2)).abs() < 1e-10);
            assert!((v - m).abs() < 1e-8);
        }
    }

    #[test]
    fn theorem_examples() {
        let b = round_data(2.0, 1.0);
        assert!(bound_theorem(&round_table(), &b).unwrap().value.abs() < 1e-15);
        let b = round_data(2.0 * 0.5f64.sqrt(), 1.0);
        assert!((bound_theorem(&round_table(), &b).unwrap().value - 0.25).abs() < 1e-14);
        assert!((theorem_formula(1.0, 0.1, 1.0) - 0.105).abs() < 1e-15);
    }

    #[test]
    fn theorem_matches_general_with_realizing_rep() {
        // α = 0.4 t², β = 0.5 + t/2 has ζ̂ > 0; H ≡ 2 gives ℋ = 1.
        let table = PathTable::from_functions(17, |t| 0.4 * t * t + 0.01, |t| 0.5 + 0.5 * t).unwrap();
        let b = round_data(2.0, 1.0);
        let th = bound_theorem(&table, &b).unwrap();
        let gen = bound_general(&table, &th.reparam, &b).unwrap();
        assert!((th.value - gen).abs() < 1e-6, "{} vs {gen}", th.value);
    }

    #[test]
    fn half_r_examples() {
        assert_eq!(bound_half_r(&round_data(2.0, 1.0)), 0.5);
        assert_eq!(bound_half_r(&round_data(2.0, 3.0)), 1.5);
    }

    #[test]
    fn small_k_affine_tends_to_half_r() {
        let table = PathTable::from_functions(17, |t| 0.3 + 0.1 * t, |t| 0.6 + 0.4 * t).unwrap();
        let b = round_data(2.0, 1.0);
        let rep = Reparameterization::affine_density(1e-6, vec![1.0]).unwrap();
        let v = bound_general(&table, &rep, &b).unwrap();
        assert!((v - 0.5).abs() < 1e-4, "{v}");
    }

    #[test]
    fn inverse_is_consistent() {
        let table = PathTable::from_functions(17, |t| 0.4 * t * t + 0.01, |t| 0.5 + 0.5 * t).unwrap();
        for rep in [
            Reparameterization::ode_sqrt(&table, 1.3).unwrap(),
            Reparameterization::affine_density(2.0, vec![1.0, 0.2, 3.0]).unwrap(),
            Reparameterization::piecewise_linear(vec![1.0, 1.1, 2.0, 2.05]).unwrap(),
        ] {
            assert!((rep.s(0.0) - 1.0).abs() < 1e-15);
            assert!((rep.s(1.0) - rep.b()).abs() < 1e-12);
            for t in [0.05, 0.3, 0.77] {
                assert!((rep.t_of_s(rep.s(t)) - t).abs() < 1e-12);
                let h = 1e-6;
                let fd = (rep.s(t + h) - rep.s(t - h)) / (2.0 * h);
                assert!((fd - rep.s_prime(t)).abs() < 1e-5 * fd.max(1.0));
            }
        }
    }

    #[test]
    fn invalid_reps_rejected() {
        assert!(Reparameterization::piecewise_linear(vec![1.0, 0.9]).is_err());
        assert!(Reparameterization::affine_density(0.0, vec![1.0]).is_err());
        assert!(Reparameterization::affine_density(1.0, vec![1.0, -1.0]).is_err());
        let table = round_table();
        // α ≡ 0 makes the ODE choice degenerate (s ≡ 1).
        let rep = Reparameterization::ode_sqrt(&table, 1.0).unwrap();
        assert!(rep.validate().is_err());
    }

    #[test]
    fn optimizer_dominates_baselines() {
        let table = PathTable::from_functions(17, |t| 0.05 * (1.0 - t) + 0.02, |t| 0.7 + 0.3 * t).unwrap();
        let b = round_data(2.0, 1.0);
        for fam in [Family::OdeSqrt, Family::AffineDensity, Family::PiecewiseLinear] {
            let res = optimize_s(&table, &b, fam, 120).unwrap();
            assert!(res.bound <= res.bound_theorem.min(res.bound_half_r) + 1e-10);
            assert!(res.evaluations <= 121);
            let again = optimize_s(&table, &b, fam, 120).unwrap();
            assert_eq!(res.bound.to_bits(), again.bound.to_bits());
        }
    }

    #[test]
    fn round_optimizer_returns_rep_independent_value() {
        let b = round_data(2.0 * 0.5f64.sqrt(), 1.0);
        for fam in [Family::OdeSqrt, Family::AffineDensity, Family::PiecewiseLinear] {
            let res = optimize_s(&round_table(), &b, fam, 60).unwrap();
            assert!((res.bound - 0.25).abs() < 1e-10, "{fam:?}: {}", res.bound);
        }
    }

    #[test]
    fn theorem_is_increasing_in_zeta() {
        for h in [0.3, 1.0, 2.5] {
            let mut prev = theorem_formula(1.0, 0.0, h);
            for i in 1..20 {
                let v = theorem_formula(1.0, i as f64 * 0.05, h);
                assert!(v > prev);
                prev = v;
            }
        }
    }
}
