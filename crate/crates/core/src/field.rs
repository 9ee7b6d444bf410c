//! Grid-sampled scalar, covector and symmetric-tensor fields on the round
//! sphere. Tensor components are taken in the orthonormal frame
//! `(e_θ, e_λ)` of `σ_o`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{QsbError, Result};
use crate::grid::{Harmonics, SphereGrid};

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(QsbError::InvalidField(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(QsbError::InvalidField(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Unchecked constructor for values produced by grid operations.
    pub(crate) fn raw(grid: Arc<SphereGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<SphereGrid>, c: f64) -> Self {
        let n = grid.node_count();
        Self { grid, values: vec![c; n] }
    }

    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|k| {
                let (th, la) = grid.node(k);
                f(th, la)
            })
            .collect();
        Self { grid, values }
    }

    /// Field from a function of the embedding coordinates `(x₁, x₂, x₃)`.
    pub fn from_cartesian(grid: Arc<SphereGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|k| f(grid.cartesian(k))).collect();
        Self { grid, values }
    }

    pub fn from_harmonics(grid: Arc<SphereGrid>, h: &Harmonics) -> Self {
        let values = grid.synthesize(h);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn harmonics(&self) -> Harmonics {
        self.grid.analyze(&self.values)
    }

    /// `∫ f dμ_o`.
    pub fn integrate(&self) -> f64 {
        self.grid.quadrature(&self.values)
    }

    /// Spectral Laplacian of `σ_o`, truncated at the grid's operator degree.
    pub fn laplacian(&self) -> Self {
        let mut h = self.harmonics();
        h.map_degree(|l| -((l * (l + 1)) as f64));
        Self::raw(self.grid.clone(), self.grid.synthesize(&h))
    }

    /// Solves `Δ_o u = self` for the mean-zero `u`. The mean of `self` is
    /// discarded.
    pub fn inverse_laplacian(&self) -> Self {
        let mut h = self.harmonics();
        h.map_degree(|l| if l == 0 { 0.0 } else { -1.0 / ((l * (l + 1)) as f64) });
        Self::raw(self.grid.clone(), self.grid.synthesize(&h))
    }

    /// Projection onto the harmonics the grid operators resolve.
    pub fn smoothed(&self) -> Self {
        Self::raw(self.grid.clone(), self.grid.synthesize(&self.harmonics()))
    }

    pub fn gradient(&self) -> CovectorField {
        let (th, la) = self.grid.synthesize_gradient(&self.harmonics());
        CovectorField { grid: self.grid.clone(), theta: th, lambda: la }
    }

    pub fn hessian(&self) -> SymTensorField {
        let (tt, tl, ll) = self.grid.synthesize_hessian(&self.harmonics());
        SymTensorField { grid: self.grid.clone(), tt, tl, ll }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.len() == other.len());
        Self::raw(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Maximum of the band-limited interpolant: located on a grid with band
    /// limit `max(3L, 64)`, then refined by the vertex of the quadratic
    /// through the 3×3 neighbourhood in `(θ, λ)`. Never below the node
    /// maximum.
    pub fn interpolated_max(&self) -> f64 {
        let fine = fine_grid(self.grid.band_limit());
        let f = self.resample(fine.clone());
        let (nt, nl) = (fine.n_lat(), fine.n_lon());
        let v = &f.values;
        let k = (0..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b });
        let (i, j) = (k / nl, k % nl);
        let mut peak = v[k];
        if i > 0 && i + 1 < nt {
            let at = |di: isize, dj: isize| {
                let ii = (i as isize + di) as usize;
                let jj = (j as isize + dj).rem_euclid(nl as isize) as usize;
                v[ii * nl + jj]
            };
            let th = fine.theta();
            let (h0, h1) = (th[i] - th[i - 1], th[i + 1] - th[i]);
            let dl = 2.0 * std::f64::consts::PI / nl as f64;
            // Gradient and Hessian of the local quadratic in (θ, λ).
            let d0 = (at(0, 0) - at(-1, 0)) / h0;
            let d1 = (at(1, 0) - at(0, 0)) / h1;
            let htt = 2.0 * (d1 - d0) / (h0 + h1);
            let gt = d0 + 0.5 * htt * h0;
            let gl = (at(0, 1) - at(0, -1)) / (2.0 * dl);
            let hll = (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) / (dl * dl);
            let htl = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / ((h0 + h1) * 2.0 * dl);
            let det = htt * hll - htl * htl;
            if htt < 0.0 && det > 0.0 {
                let x = -(hll * gt - htl * gl) / det;
                let y = -(htt * gl - htl * gt) / det;
                if x.abs() <= h0.max(h1) && y.abs() <= dl {
                    peak += 0.5 * (gt * x + gl * y);
                }
            }
        }
        peak.max(self.max())
    }

    /// Minimum of the band-limited interpolant; see [`Self::interpolated_max`].
    pub fn interpolated_min(&self) -> f64 {
        -self.scale(-1.0).interpolated_max()
    }

    /// Mean with respect to `dμ_o`.
    pub fn mean(&self) -> f64 {
        self.integrate() / (4.0 * std::f64::consts::PI)
    }

    /// The same function sampled on another grid, through its harmonics.
    pub fn resample(&self, grid: Arc<SphereGrid>) -> Self {
        if Arc::ptr_eq(&self.grid, &grid) {
            return self.clone();
        }
        let h = self.harmonics();
        let deg = h.degree().min(grid.degree());
        let mut out = Harmonics::zeros(deg);
        for l in 0..=deg {
            for m in 0..=l {
                let (a, b) = h.get(l, m);
                out.set(l, m, a, b);
            }
        }
        Self::from_harmonics(grid, &out)
    }
}

fn fine_grid(band_limit: usize) -> Arc<SphereGrid> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SphereGrid>>>> = OnceLock::new();
    let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    map.entry(band_limit)
        .or_insert_with(|| Arc::new(SphereGrid::new((3 * band_limit).max(64)).expect("band limit already valid")))
        .clone()
}

#[derive(Debug, Clone)]
pub struct CovectorField {
    grid: Arc<SphereGrid>,
    theta: Vec<f64>,
    lambda: Vec<f64>,
}

impl CovectorField {
    pub fn new(grid: Arc<SphereGrid>, theta: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let n = grid.node_count();
        if theta.len() != n || lambda.len() != n {
            return Err(QsbError::InvalidField("covector component count mismatch".into()));
        }
        if theta.iter().chain(&lambda).any(|v| !v.is_finite()) {
            return Err(QsbError::InvalidField("non-finite covector component".into()));
        }
        Ok(Self { grid, theta, lambda })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Pointwise `⟨self, other⟩_{σ_o}`.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let v = (0..self.theta.len())
            .map(|k| self.theta[k] * other.theta[k] + self.lambda[k] * other.lambda[k])
            .collect();
        ScalarField::raw(self.grid.clone(), v)
    }

    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    /// Symmetrized product `a ⊗ b + b ⊗ a`.
    pub fn sym_product(&self, other: &Self) -> SymTensorField {
        let n = self.theta.len();
        let mut tt = vec![0.0; n];
        let mut tl = vec![0.0; n];
        let mut ll = vec![0.0; n];
        for k in 0..n {
            tt[k] = 2.0 * self.theta[k] * other.theta[k];
            tl[k] = self.theta[k] * other.lambda[k] + self.lambda[k] * other.theta[k];
            ll[k] = 2.0 * self.lambda[k] * other.lambda[k];
        }
        SymTensorField { grid: self.grid.clone(), tt, tl, ll }
    }
}

#[derive(Debug, Clone)]
pub struct SymTensorField {
    grid: Arc<SphereGrid>,
    tt: Vec<f64>,
    tl: Vec<f64>,
    ll: Vec<f64>,
}

impl SymTensorField {
    pub fn new(grid: Arc<SphereGrid>, tt: Vec<f64>, tl: Vec<f64>, ll: Vec<f64>) -> Result<Self> {
        let n = grid.node_count();
        if tt.len() != n || tl.len() != n || ll.len() != n {
            return Err(QsbError::InvalidField("tensor component count mismatch".into()));
        }
        if tt.iter().chain(&tl).chain(&ll).any(|v| !v.is_finite()) {
            return Err(QsbError::InvalidField("non-finite tensor component".into()));
        }
        Ok(Self { grid, tt, tl, ll })
    }

    /// `f · σ_o`.
    pub fn conformal(f: &ScalarField) -> Self {
        Self {
            grid: f.grid.clone(),
            tt: f.values.clone(),
            tl: vec![0.0; f.len()],
            ll: f.values.clone(),
        }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn tt(&self) -> &[f64] {
        &self.tt
    }

    pub fn tl(&self) -> &[f64] {
        &self.tl
    }

    pub fn ll(&self) -> &[f64] {
        &self.ll
    }

    /// Trace with respect to `σ_o`.
    pub fn trace(&self) -> ScalarField {
        let v = self.tt.iter().zip(&self.ll).map(|(a, b)| a + b).collect();
        ScalarField::raw(self.grid.clone(), v)
    }

    /// Pointwise `|T|²_{σ_o}`.
    pub fn norm_sq(&self) -> ScalarField {
        let v = (0..self.tt.len())
            .map(|k| self.tt[k] * self.tt[k] + 2.0 * self.tl[k] * self.tl[k] + self.ll[k] * self.ll[k])
            .collect();
        ScalarField::raw(self.grid.clone(), v)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        let f = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Self {
            grid: self.grid.clone(),
            tt: f(&self.tt, &other.tt),
            tl: f(&self.tl, &other.tl),
            ll: f(&self.ll, &other.ll),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_sq().max().sqrt()
    }
}
