//! Quasi-spherical extension of boundary data.
//!
//! On `[1, ∞) × S²` with background `ds² + s² σ(t(s))`, the lapse `u` making
//! the scalar curvature vanish solves a parabolic equation in `s`. We solve
//! for `v(s, ·) = u(s, ·)` pulled back to the flow-adapted frame of the
//! gauge-fixed path, in the log variable `ρ = ln s`:
//!
//! ```text
//! ∂_ρ v = ½ v² e^{−2w} Δ_o v + v/2 + (s t′)² |D|²_σ v / 16 − K_σ v³ / 2
//!         − s t′ e^{−2w} ⟨dψ, dv⟩_o
//! ```
//!
//! where `w`, `K_σ`, `D`, `ψ` are path data at `t(s)` and `t′ = dt/ds`.
//! Everything is in units of the area radius `r`; `s = 1` is the boundary
//! and the background is flat for `s ≥ b`.
//!
//! Time stepping is ARS(4,4,3) IMEX: `μ Δ_o v` with the frozen scalar
//! `μ = mean(½ v² e^{−2w})` is implicit, the rest explicit. Step size is
//! chosen by step doubling with local extrapolation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::bound::{Reparameterization, TheoremBound};
use crate::error::{QsbError, Result};
use crate::field::{CovectorField, ScalarField};
use crate::grid::SphereGrid;
use crate::metric::BoundaryData;
use crate::path::sample;

/// `v₀ = 2 / (r H)`, the lapse on the boundary sphere.
pub fn init_lapse(b: &BoundaryData) -> ScalarField {
    let r = b.metric().r();
    b.h().map(|h| 2.0 / (r * h))
}

/// `s(t)` used for the extension when none is given: the closed-form choice
/// when it is a valid reparameterization, `s = 1 + t` otherwise (round data,
/// where that choice degenerates to `s ≡ 1`).
pub fn default_rep(theorem: &TheoremBound) -> Reparameterization {
    match theorem.reparam.validate() {
        Ok(()) => theorem.reparam.clone(),
        Err(_) => Reparameterization::affine(1.0).expect("k = 1 is valid"),
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionConfig {
    pub boundary: BoundaryData,
    pub rep: Reparameterization,
    pub s_max: f64,
    /// Local error target on `s·|δv|`.
    pub tol: f64,
    /// Largest step in `ln s`.
    pub h_max: f64,
    pub h_init: f64,
    pub gauge_tol: f64,
}

impl ExtensionConfig {
    pub fn new(boundary: BoundaryData, rep: Reparameterization) -> Self {
        Self { boundary, rep, s_max: 1e3, tol: 1e-10, h_max: 0.02, h_init: 1e-3, gauge_tol: 1e-8 }
    }

    fn validate(&self) -> Result<()> {
        self.rep.validate()?;
        if !(self.s_max >= 100.0 && self.s_max > self.rep.b()) {
            return Err(QsbError::Config(format!(
                "s_max = {} must be at least 100 and exceed b = {}",
                self.s_max,
                self.rep.b()
            )));
        }
        for (name, v) in [("tol", self.tol), ("h_max", self.h_max), ("h_init", self.h_init), ("gauge_tol", self.gauge_tol)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QsbError::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// PDE coefficients at one value of `s`.
#[derive(Debug)]
struct Coeffs {
    t_prime: f64,
    e2w: Vec<f64>,
    inv_e2w: Vec<f64>,
    k: Vec<f64>,
    d_sq: Vec<f64>,
    dpsi: Option<CovectorField>,
    alpha: f64,
    beta: f64,
}

impl Coeffs {
    fn flat(n: usize) -> Self {
        Self {
            t_prime: 0.0,
            e2w: vec![1.0; n],
            inv_e2w: vec![1.0; n],
            k: vec![1.0; n],
            d_sq: vec![0.0; n],
            dpsi: None,
            alpha: 0.0,
            beta: 1.0,
        }
    }
}

struct Solver<'a> {
    cfg: &'a ExtensionConfig,
    grid: Arc<SphereGrid>,
    flat: Arc<Coeffs>,
    cache: HashMap<u64, Arc<Coeffs>>,
}

// ARS(4,4,3): implicit part has γ = ½ on the diagonal; both tableaux share
// their last row with the weights, so the step result is the last stage.
const GAMMA: f64 = 0.5;
const C: [f64; 5] = [0.0, 0.5, 2.0 / 3.0, 0.5, 1.0];
const A_IMP: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 0.0],
    [1.0 / 6.0, 0.0, 0.0, 0.0],
    [-0.5, 0.5, 0.0, 0.0],
    [1.5, -1.5, 0.5, 0.0],
];
const A_EXP: [[f64; 4]; 4] = [
    [0.5, 0.0, 0.0, 0.0],
    [11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0],
    [5.0 / 6.0, -5.0 / 6.0, 0.5, 0.0],
    [0.25, 1.75, 0.75, -1.75],
];

impl Solver<'_> {
    fn coeffs(&mut self, s: f64) -> Result<Arc<Coeffs>> {
        let rep = &self.cfg.rep;
        if s >= rep.b() {
            return Ok(self.flat.clone());
        }
        if let Some(c) = self.cache.get(&s.to_bits()) {
            return Ok(c.clone());
        }
        let t = rep.t_of_s(s);
        let t_prime = rep.t_prime(s);
        if !t_prime.is_finite() || t_prime < 0.0 {
            return Err(QsbError::InvalidReparameterization(format!("t'({s}) = {t_prime}")));
        }
        let p = sample(self.cfg.boundary.metric(), t, self.cfg.gauge_tol, false)?;
        let e2w: Vec<f64> = p.w.values().iter().map(|w| (2.0 * w).exp()).collect();
        let c = Arc::new(Coeffs {
            t_prime,
            inv_e2w: e2w.iter().map(|e| 1.0 / e).collect(),
            e2w,
            k: p.k.into_values(),
            d_sq: p.d_norm_sq.into_values(),
            dpsi: Some(p.dpsi),
            alpha: p.alpha,
            beta: p.beta,
        });
        self.cache.insert(s.to_bits(), c.clone());
        Ok(c)
    }

    /// Explicit part of the right-hand side, `F(v) − μ Δ_o v`.
    fn explicit(&mut self, v: &[f64], rho: f64, mu: f64) -> Result<Vec<f64>> {
        let s = rho.exp();
        let c = self.coeffs(s)?;
        let vf = ScalarField::raw(self.grid.clone(), v.to_vec());
        let lap = vf.laplacian();
        let adv = match (&c.dpsi, c.t_prime) {
            (Some(dpsi), tp) if tp != 0.0 => Some(dpsi.dot(&vf.gradient())),
            _ => None,
        };
        let st = s * c.t_prime;
        let out = (0..v.len())
            .map(|i| {
                let x = v[i];
                let mut f = (0.5 * x * x * c.inv_e2w[i] - mu) * lap.values()[i] + 0.5 * x
                    + st * st * c.d_sq[i] * x / 16.0
                    - 0.5 * c.k[i] * x * x * x;
                if let Some(a) = &adv {
                    f -= st * c.inv_e2w[i] * a.values()[i];
                }
                f
            })
            .collect();
        Ok(out)
    }

    /// `(I − hγμΔ_o)⁻¹ rhs`, acting only on the resolved harmonics.
    fn implicit_solve(&self, rhs: &[f64], hgm: f64) -> Vec<f64> {
        let mut coef = self.grid.analyze(rhs);
        coef.map_degree(|l| 1.0 / (1.0 + hgm * (l * (l + 1)) as f64) - 1.0);
        let corr = self.grid.synthesize(&coef);
        rhs.iter().zip(&corr).map(|(a, b)| a + b).collect()
    }

    fn ars_step(&mut self, v: &[f64], rho: f64, h: f64) -> Result<Vec<f64>> {
        let c0 = self.coeffs(rho.exp())?;
        let n = v.len();
        let mu = (0..n).map(|i| 0.5 * v[i] * v[i] * c0.inv_e2w[i]).sum::<f64>() / n as f64;
        let hgm = h * GAMMA * mu;

        let mut nexp: Vec<Vec<f64>> = vec![self.explicit(v, rho, mu)?];
        let mut limp: Vec<Vec<f64>> = Vec::with_capacity(4);
        let mut y = Vec::new();
        for i in 0..4 {
            let mut rhs = v.to_vec();
            for (j, nj) in nexp.iter().enumerate() {
                let a = h * A_EXP[i][j];
                if a != 0.0 {
                    rhs.iter_mut().zip(nj).for_each(|(r, x)| *r += a * x);
                }
            }
            for (j, lj) in limp.iter().enumerate() {
                let a = h * A_IMP[i][j];
                if a != 0.0 {
                    rhs.iter_mut().zip(lj).for_each(|(r, x)| *r += a * x);
                }
            }
            y = self.implicit_solve(&rhs, hgm);
            if i < 3 {
                // μΔY from the solve itself: Y − rhs = hγ μΔY.
                let l: Vec<f64> = y.iter().zip(&rhs).map(|(a, b)| (a - b) / (h * GAMMA)).collect();
                limp.push(l);
                nexp.push(self.explicit(&y, rho + C[i + 1] * h, mu)?);
            }
        }
        Ok(y)
    }

    fn cal_h(&self, v: &[f64], s: f64, c: &Coeffs) -> f64 {
        let f: Vec<f64> = v.iter().zip(&c.e2w).map(|(x, e)| e / x).collect();
        s * self.grid.quadrature(&f) / (4.0 * PI)
    }
}

/// One accepted sample of the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionSample {
    pub s: f64,
    pub cal_h: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t_prime: f64,
}

#[derive(Debug, Clone)]
pub struct ExtensionResult {
    /// Samples at `s = 1`, every accepted step, and `s_max`.
    pub samples: Vec<ExtensionSample>,
    pub r: f64,
    pub b: f64,
    pub s_max: f64,
    pub steps: usize,
    pub rejected: usize,
    pub min_v: f64,
    /// Lapse at `s_max`.
    pub v_final: ScalarField,
}

impl ExtensionResult {
    pub fn s(&self) -> Vec<f64> {
        self.samples.iter().map(|x| x.s).collect()
    }

    pub fn cal_h(&self) -> Vec<f64> {
        self.samples.iter().map(|x| x.cal_h).collect()
    }

    /// Mass fitted on `[s_max/2, s_max]`, in units of length.
    pub fn mass_fit(&self) -> Result<MassFit> {
        let f = extract_mass(&self.s(), &self.cal_h(), (0.5 * self.s_max, self.s_max))?;
        Ok(MassFit { mass: self.r * f.mass, fit_residual: self.r * f.fit_residual, m_q: self.r * f.m_q, ..f })
    }
}

/// Extremum over the interpolant, skipped where the path is flat.
fn refined(values: &[f64], grid: &Arc<SphereGrid>, flat: f64, f: impl Fn(&ScalarField) -> f64) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo == 0.0 {
        return flat;
    }
    f(&ScalarField::raw(grid.clone(), values.to_vec()))
}

pub fn evolve(cfg: &ExtensionConfig) -> Result<ExtensionResult> {
    cfg.validate()?;
    let grid = cfg.boundary.h().grid().clone();
    let n = grid.node_count();
    let mut solver = Solver { cfg, grid, flat: Arc::new(Coeffs::flat(n)), cache: HashMap::new() };

    let b = cfg.rep.b();
    let rho_b = b.ln();
    let rho_end = cfg.s_max.ln();
    let mut rho = 0.0;
    let mut s = 1.0;
    let mut v = init_lapse(&cfg.boundary).into_values();
    let mut h = cfg.h_init.min(cfg.h_max);

    let record = |solver: &mut Solver, v: &[f64], s: f64| -> Result<ExtensionSample> {
        let c = solver.coeffs(s)?;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        Ok(ExtensionSample {
            s,
            cal_h: solver.cal_h(v, s, &c),
            min_v: lo,
            max_v: hi,
            alpha: refined(&c.d_sq, &solver.grid, c.alpha, |f| f.interpolated_max() / 8.0),
            beta: refined(&c.k, &solver.grid, c.beta, |f| f.interpolated_min()),
            t_prime: c.t_prime,
        })
    };
    let mut samples = vec![record(&mut solver, &v, s)?];
    let (mut steps, mut rejected) = (0, 0);

    while rho < rho_end {
        // Land exactly on b and on s_max.
        let target = if rho < rho_b { rho_b } else { rho_end };
        let mut hit = false;
        if rho + h >= target - 1e-12 * (1.0 + target.abs()) {
            h = target - rho;
            hit = true;
        }
        if h < 1e-12 {
            return Err(QsbError::StepSizeUnderflow { s, h });
        }

        let trial = (|| -> Result<(Vec<f64>, f64)> {
            let full = solver.ars_step(&v, rho, h)?;
            let half = solver.ars_step(&v, rho, 0.5 * h)?;
            let half = solver.ars_step(&half, rho + 0.5 * h, 0.5 * h)?;
            let s_end = (rho + h).exp();
            let mut diff = 0.0f64;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let d = half[i] - full[i];
                diff = diff.max(d.abs());
                out.push(half[i] + d / 7.0);
            }
            Ok((out, s_end * diff / (7.0 * cfg.tol)))
        })()?;
        let (v_new, err) = trial;

        let finite = v_new.iter().all(|x| x.is_finite()) && err.is_finite();
        if finite && err <= 1.0 {
            rho = if hit { target } else { rho + h };
            s = if hit && target == rho_b { b } else if hit { cfg.s_max } else { rho.exp() };
            v = v_new;
            steps += 1;
            solver.cache.clear();
            let rec = record(&mut solver, &v, s)?;
            if !(rec.min_v > 0.0) {
                return Err(QsbError::LapseBlowup { s, min_v: rec.min_v });
            }
            samples.push(rec);
            let grow = if err > 0.0 { (0.9 * err.powf(-0.25)).clamp(0.2, 2.0) } else { 2.0 };
            h = (h * grow).min(cfg.h_max);
        } else {
            rejected += 1;
            h *= if finite { (0.9 * err.powf(-0.25)).clamp(0.2, 0.9) } else { 0.25 };
        }
    }

    let min_v = samples.iter().fold(f64::INFINITY, |a, x| a.min(x.min_v));
    let v_final = ScalarField::raw(cfg.boundary.h().grid().clone(), v);
    Ok(ExtensionResult {
        samples,
        r: cfg.boundary.metric().r(),
        b,
        s_max: cfg.s_max,
        steps,
        rejected,
        min_v,
        v_final,
    })
}

/// Least-squares fit of `ℋ_s = s − m + c₁/s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassFit {
    pub mass: f64,
    pub c1: f64,
    /// Root-mean-square residual of the fit.
    pub fit_residual: f64,
    /// `(s − ℋ²/s)/2` at the last sample.
    pub m_q: f64,
    pub samples: usize,
}

pub const MIN_TAIL_SAMPLES: usize = 20;

/// Fits the samples with `s ∈ [lo, hi]`. Dimensionless in, dimensionless out.
pub fn extract_mass(s: &[f64], cal_h: &[f64], window: (f64, f64)) -> Result<MassFit> {
    let idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= window.0 && s[i] <= window.1).collect();
    if idx.len() < MIN_TAIL_SAMPLES {
        return Err(QsbError::InsufficientTail { samples: idx.len(), required: MIN_TAIL_SAMPLES });
    }
    let n = idx.len() as f64;
    let x: Vec<f64> = idx.iter().map(|&i| 1.0 / s[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| cal_h[i] - s[i]).collect();
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = ym - c1 * xm;
    let rss: f64 = x.iter().zip(&y).map(|(xi, yi)| (yi - a - c1 * xi).powi(2)).sum();
    let last = *idx.last().unwrap();
    let (sl, hl) = (s[last], cal_h[last]);
    Ok(MassFit { mass: -a, c1, fit_residual: (rss / n).sqrt(), m_q: 0.5 * (sl - hl * hl / sl), samples: idx.len() })
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// Residual of `d(ℋ²/s)/ds + α t′² ℋ² − β ≥ 0` per sample; `None` at the
    /// ends and where the 3-point stencil would straddle `b`.
    pub residuals: Vec<Option<f64>>,
    pub worst_residual: f64,
    /// `Q(s) = s − ℋ²_s/s`.
    pub q_series: Vec<f64>,
    /// Largest increase of `Q` between consecutive samples.
    pub q_max_increase: f64,
    /// `α ≡ 0` along the run, where `Q` is expected to be non-increasing.
    pub round: bool,
}

/// Checks the differential inequality for `ℋ_s` along a run, in the form
/// divided by `s`, which holds with equality on flat exteriors of round
/// data.
pub fn verify_monotonicity(res: &ExtensionResult) -> MonotonicityReport {
    let sm = &res.samples;
    let n = sm.len();
    let f: Vec<f64> = sm.iter().map(|x| x.cal_h * x.cal_h / x.s).collect();
    let mut residuals = vec![None; n];
    let mut worst = f64::INFINITY;
    for i in 1..n.saturating_sub(1) {
        let (s0, s1, s2) = (sm[i - 1].s, sm[i].s, sm[i + 1].s);
        if s0 < res.b && s2 > res.b {
            continue;
        }
        let (hm, hp) = (s1 - s0, s2 - s1);
        let df = -f[i - 1] * hp / (hm * (hm + hp)) + f[i] * (hp - hm) / (hm * hp) + f[i + 1] * hm / (hp * (hm + hp));
        let x = &sm[i];
        let r = df + x.alpha * x.t_prime * x.t_prime * x.cal_h * x.cal_h - x.beta;
        worst = worst.min(r);
        residuals[i] = Some(r);
    }
    let q_series: Vec<f64> = sm.iter().map(|x| x.s - x.cal_h * x.cal_h / x.s).collect();
    let q_max_increase = q_series.windows(2).fold(f64::NEG_INFINITY, |a, w| a.max(w[1] - w[0]));
    let round = sm.iter().all(|x| x.alpha <= 1e-14);
    MonotonicityReport { residuals, worst_residual: worst, q_series, q_max_increase, round }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ConformalMetric;

    fn round(h: f64, r: f64, l: usize) -> BoundaryData {
        let g = Arc::new(SphereGrid::new(l).unwrap());
        BoundaryData::new(ConformalMetric::round(g.clone(), r), ScalarField::constant(g, h)).unwrap()
    }

    /// `y = v⁻²` solves `y′ = (1 − y)/s`, so `v = (1 + (y₀ − 1)/s)^{−1/2}`
    /// with `y₀ = H²/4` for `r = 1`.
    fn schwarzschild_v(h: f64, s: f64) -> f64 {
        (1.0 + (h * h / 4.0 - 1.0) / s).powf(-0.5)
    }

    #[test]
    fn init_lapse_examples() {
        assert!(init_lapse(&round(2.0, 1.0, 4)).values().iter().all(|&v| v == 1.0));
        let h = 2.0 * 0.5f64.sqrt();
        let v0 = init_lapse(&round(h, 1.0, 4));
        assert!(v0.values().iter().all(|&v| (v - 0.5f64.powf(-0.5)).abs() < 1e-15));
        assert!(init_lapse(&round(1.0, 2.0, 4)).values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn euclidean_run_is_exact() {
        let cfg = ExtensionConfig::new(round(2.0, 1.0, 6), Reparameterization::affine(1.0).unwrap());
        let res = evolve(&cfg).unwrap();
        assert!(res.v_final.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        for x in &res.samples {
            assert!((x.cal_h - x.s).abs() <= 1e-12 * x.s, "{x:?}");
        }
        assert_eq!(res.samples.last().unwrap().s, 1e3);
        let fit = res.mass_fit().unwrap();
        assert!(fit.mass.abs() < 1e-9);
        let mono = verify_monotonicity(&res);
        assert!(mono.worst_residual >= -1e-8);
    }

    #[test]
    fn schwarzschild_matches_closed_form() {
        let m: f64 = 0.25;
        let h = 2.0 * (1.0 - 2.0 * m).sqrt();
        let mut cfg = ExtensionConfig::new(round(h, 1.0, 4), Reparameterization::affine(1.0).unwrap());
        cfg.s_max = 200.0;
        let res = evolve(&cfg).unwrap();
        let s = res.s_max;
        let err = res.v_final.values().iter().map(|v| (v - schwarzschild_v(h, s)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        for x in &res.samples {
            assert!((x.min_v - schwarzschild_v(h, x.s)).abs() < 1e-6);
        }
        let mono = verify_monotonicity(&res);
        assert!(mono.round);
        assert!(mono.q_series.iter().all(|q| (q - 2.0 * m).abs() < 1e-8));
    }

    #[test]
    fn extract_mass_examples() {
        let s: Vec<f64> = (0..40).map(|i| 500.0 + 12.5 * i as f64).collect();
        let f = extract_mass(&s, &s, (500.0, 1000.0)).unwrap();
        assert_eq!(f.mass, 0.0);
        assert_eq!(f.fit_residual, 0.0);

        let h: Vec<f64> = s.iter().map(|x| x - 0.3 + 0.7 / x).collect();
        let f = extract_mass(&s, &h, (500.0, 1000.0)).unwrap();
        assert!((f.mass - 0.3).abs() < 1e-10);
        assert!((f.c1 - 0.7).abs() < 1e-6);

        let h: Vec<f64> = s.iter().map(|x| (x * x - 0.5 * x).sqrt()).collect();
        let f = extract_mass(&s, &h, (500.0, 1000.0)).unwrap();
        assert!((f.mass - 0.25).abs() < 1e-5);
        assert!((f.m_q - 0.25).abs() < 1e-9);

        assert!(matches!(
            extract_mass(&s[..10], &s[..10], (500.0, 1000.0)),
            Err(QsbError::InsufficientTail { samples: 10, required: 20 })
        ));
    }

    #[test]
    fn config_is_validated() {
        let mut cfg = ExtensionConfig::new(round(2.0, 1.0, 4), Reparameterization::affine(1.0).unwrap());
        cfg.s_max = 50.0;
        assert!(matches!(evolve(&cfg), Err(QsbError::Config(_))));
    }
}
