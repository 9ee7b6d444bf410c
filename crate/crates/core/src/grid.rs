//! Gauss–Legendre × equispaced-longitude grid on the unit round sphere, with
//! real spherical-harmonic analysis and synthesis.
//!
//! A grid built for band limit `L` resolves harmonics up to degree `2L`: the
//! spectral operators truncate at `2L`, so the product of two degree-`L`
//! fields is represented without truncation. The grid has `N = 2L + 2`
//! colatitude rings (roots of `P_N`, never at a pole) and `M = 4L + 4`
//! longitudes, which makes the analysis exact for fields of degree up to
//! `2L + 3` and quadrature exact up to degree `4L + 3`.
//!
//! Real harmonics use the orthonormal associated Legendre functions
//! `P̃_lm` with the Condon–Shortley phase, so that
//! `f = Σ P̃_lm(cos θ) (a_lm cos mλ + b_lm sin mλ)` and
//! `Re Y_lm = P̃_lm cos mλ` for the complex `Y_lm` of the usual convention.

use std::f64::consts::PI;

use crate::error::{QsbError, Result};
use crate::numeric::pairwise_sum;

/// Smallest band limit accepted by [`SphereGrid::new`].
pub const MIN_BAND_LIMIT: usize = 4;

#[derive(Debug, Clone)]
pub struct SphereGrid {
    band_limit: usize,
    degree: usize,
    n_lat: usize,
    n_lon: usize,
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    lambda: Vec<f64>,
    weights: Vec<f64>,
    /// `P̃_lm(cos θ_i)`, ring-major, `idx(l, m)` inside each ring.
    plm: Vec<f64>,
    /// `d P̃_lm / dθ` at the rings.
    dplm: Vec<f64>,
    /// `cos(m λ_j)` for `m ≤ degree`, `m`-major.
    cos_ml: Vec<f64>,
    sin_ml: Vec<f64>,
}

/// Flat index of `(l, m)`, `0 ≤ m ≤ l`, in triangular coefficient storage.
#[inline]
pub fn lm_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Number of `(l, m)` pairs with `m ≤ l ≤ degree`.
#[inline]
pub fn lm_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

impl SphereGrid {
    pub fn new(band_limit: usize) -> Result<Self> {
        if band_limit < MIN_BAND_LIMIT {
            return Err(QsbError::Config(format!(
                "band limit {band_limit} is below the minimum {MIN_BAND_LIMIT}"
            )));
        }
        let degree = 2 * band_limit;
        let n_lat = 2 * band_limit + 2;
        let n_lon = 4 * band_limit + 4;

        let (nodes, gl_weights) = gauss_legendre(n_lat);
        // Colatitude ascending: x = cos θ descending.
        let mut cos_theta = Vec::with_capacity(n_lat);
        let mut lat_w = Vec::with_capacity(n_lat);
        for i in (0..n_lat).rev() {
            cos_theta.push(nodes[i]);
            lat_w.push(gl_weights[i]);
        }
        let theta: Vec<f64> = cos_theta.iter().map(|x| x.acos()).collect();
        let sin_theta: Vec<f64> = cos_theta.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let dlam = 2.0 * PI / n_lon as f64;
        let lambda: Vec<f64> = (0..n_lon).map(|j| j as f64 * dlam).collect();

        let mut weights = Vec::with_capacity(n_lat * n_lon);
        for w in &lat_w {
            for _ in 0..n_lon {
                weights.push(w * dlam);
            }
        }

        let nc = lm_count(degree);
        let mut plm = vec![0.0; n_lat * nc];
        let mut dplm = vec![0.0; n_lat * nc];
        for i in 0..n_lat {
            let (x, st) = (cos_theta[i], sin_theta[i]);
            let row = &mut plm[i * nc..(i + 1) * nc];
            legendre_normalized(degree, x, st, row);
            let drow = &mut dplm[i * nc..(i + 1) * nc];
            for l in 0..=degree {
                for m in 0..=l {
                    let p = row[lm_index(l, m)];
                    let prev = if l > m { row[lm_index(l - 1, m)] } else { 0.0 };
                    let lf = l as f64;
                    let mf = m as f64;
                    let coef = if l > m {
                        ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - mf * mf)).sqrt()
                    } else {
                        0.0
                    };
                    drow[lm_index(l, m)] = (lf * x * p - coef * prev) / st;
                }
            }
        }

        let mut cos_ml = vec![0.0; (degree + 1) * n_lon];
        let mut sin_ml = vec![0.0; (degree + 1) * n_lon];
        for m in 0..=degree {
            for j in 0..n_lon {
                // Reduce the phase index exactly before taking the angle.
                let k = (m * j) % n_lon;
                let ang = k as f64 * dlam;
                cos_ml[m * n_lon + j] = ang.cos();
                sin_ml[m * n_lon + j] = ang.sin();
            }
        }

        Ok(Self {
            band_limit,
            degree,
            n_lat,
            n_lon,
            theta,
            cos_theta,
            sin_theta,
            lambda,
            weights,
            plm,
            dplm,
            cos_ml,
            sin_ml,
        })
    }

    /// Nominal band limit `L` the grid was built for.
    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    /// Truncation degree of the spectral operators (`2L`).
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub fn node_count(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    /// Area weights `dμ_o` per node, colatitude-major.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(θ, λ)` of node `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.theta[k / self.n_lon], self.lambda[k % self.n_lon])
    }

    /// Embedding coordinates `(x₁, x₂, x₃)` of node `k` in the unit sphere.
    pub fn cartesian(&self, k: usize) -> [f64; 3] {
        let i = k / self.n_lon;
        let j = k % self.n_lon;
        let (st, ct) = (self.sin_theta[i], self.cos_theta[i]);
        let (cl, sl) = (self.cos_ml[self.n_lon + j], self.sin_ml[self.n_lon + j]);
        [st * cl, st * sl, ct]
    }

    /// Quadrature `Σ w_k f_k`, reduced pairwise in node order.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.node_count());
        let prod: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| f * w)
            .collect();
        pairwise_sum(&prod)
    }

    #[inline]
    fn plm_row(&self, i: usize) -> &[f64] {
        let nc = lm_count(self.degree);
        &self.plm[i * nc..(i + 1) * nc]
    }

    #[inline]
    fn dplm_row(&self, i: usize) -> &[f64] {
        let nc = lm_count(self.degree);
        &self.dplm[i * nc..(i + 1) * nc]
    }

    /// Forward transform of grid values to real harmonic coefficients up to
    /// the operator degree.
    pub fn analyze(&self, values: &[f64]) -> Harmonics {
        assert_eq!(values.len(), self.node_count(), "field does not match grid");
        let deg = self.degree;
        let nc = lm_count(deg);
        let mut a = vec![0.0; nc];
        let mut b = vec![0.0; nc];
        let dlam = 2.0 * PI / self.n_lon as f64;
        let mut cm = vec![0.0; deg + 1];
        let mut sm = vec![0.0; deg + 1];
        let lat_w: Vec<f64> = (0..self.n_lat)
            .map(|i| self.weights[i * self.n_lon] / dlam)
            .collect();
        for i in 0..self.n_lat {
            let ring = &values[i * self.n_lon..(i + 1) * self.n_lon];
            for m in 0..=deg {
                let c = &self.cos_ml[m * self.n_lon..(m + 1) * self.n_lon];
                let s = &self.sin_ml[m * self.n_lon..(m + 1) * self.n_lon];
                let mut sc = 0.0;
                let mut ss = 0.0;
                for j in 0..self.n_lon {
                    sc += ring[j] * c[j];
                    ss += ring[j] * s[j];
                }
                let scale = if m == 0 { dlam } else { 2.0 * dlam };
                cm[m] = sc * scale;
                sm[m] = ss * scale;
            }
            let p = self.plm_row(i);
            let w = lat_w[i];
            for l in 0..=deg {
                for m in 0..=l {
                    let k = lm_index(l, m);
                    a[k] += w * p[k] * cm[m];
                    b[k] += w * p[k] * sm[m];
                }
            }
        }
        for l in 0..=deg {
            b[lm_index(l, 0)] = 0.0;
        }
        Harmonics { degree: deg, cos: a, sin: b }
    }

    /// Ring-wise Fourier synthesis: `out[i, j] = Σ_m A[i][m] cos mλ_j + B[i][m] sin mλ_j`.
    fn ring_synthesis(&self, amp_cos: &[f64], amp_sin: &[f64]) -> Vec<f64> {
        let deg = self.degree;
        let mut out = vec![0.0; self.node_count()];
        for i in 0..self.n_lat {
            let ring = &mut out[i * self.n_lon..(i + 1) * self.n_lon];
            for m in 0..=deg {
                let ac = amp_cos[i * (deg + 1) + m];
                let as_ = amp_sin[i * (deg + 1) + m];
                if ac == 0.0 && as_ == 0.0 {
                    continue;
                }
                let c = &self.cos_ml[m * self.n_lon..(m + 1) * self.n_lon];
                let s = &self.sin_ml[m * self.n_lon..(m + 1) * self.n_lon];
                for j in 0..self.n_lon {
                    ring[j] += ac * c[j] + as_ * s[j];
                }
            }
        }
        out
    }

    /// Synthesis with a per-(ring, l, m) latitude factor. With `rotate`, the
    /// longitude factor is `∂_λ` of the harmonic instead of the harmonic.
    fn synthesize_with<F>(&self, h: &Harmonics, rotate: bool, lat: F) -> Vec<f64>
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        let deg = self.degree;
        let hd = h.degree.min(deg);
        let mut amp_c = vec![0.0; self.n_lat * (deg + 1)];
        let mut amp_s = vec![0.0; self.n_lat * (deg + 1)];
        for i in 0..self.n_lat {
            for l in 0..=hd {
                for m in 0..=l {
                    let k = lm_index(l, m);
                    let (a, b) = (h.cos[k], h.sin[k]);
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let f = lat(i, l, m);
                    if rotate {
                        let mf = m as f64;
                        amp_c[i * (deg + 1) + m] += f * mf * b;
                        amp_s[i * (deg + 1) + m] -= f * mf * a;
                    } else {
                        amp_c[i * (deg + 1) + m] += f * a;
                        amp_s[i * (deg + 1) + m] += f * b;
                    }
                }
            }
        }
        self.ring_synthesis(&amp_c, &amp_s)
    }

    /// Backward transform to grid values.
    pub fn synthesize(&self, h: &Harmonics) -> Vec<f64> {
        self.synthesize_with(h, false, |i, l, m| self.plm_row(i)[lm_index(l, m)])
    }

    /// Frame components `(∂_θ f, (1/sin θ) ∂_λ f)` of `df`.
    pub fn synthesize_gradient(&self, h: &Harmonics) -> (Vec<f64>, Vec<f64>) {
        let dth = self.synthesize_with(h, false, |i, l, m| self.dplm_row(i)[lm_index(l, m)]);
        let dla = self.synthesize_with(h, true, |i, l, m| {
            self.plm_row(i)[lm_index(l, m)] / self.sin_theta[i]
        });
        (dth, dla)
    }

    /// Frame components `(θθ, θλ, λλ)` of the covariant Hessian w.r.t. `σ_o`.
    pub fn synthesize_hessian(&self, h: &Harmonics) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        // f_θθ from the associated Legendre equation.
        let h_tt = self.synthesize_with(h, false, |i, l, m| {
            let st = self.sin_theta[i];
            let cot = self.cos_theta[i] / st;
            let k = lm_index(l, m);
            let lf = l as f64;
            let mf = m as f64;
            -cot * self.dplm_row(i)[k] - (lf * (lf + 1.0) - mf * mf / (st * st)) * self.plm_row(i)[k]
        });
        // (f_θλ − cot θ f_λ) / sin θ
        let h_tl = self.synthesize_with(h, true, |i, l, m| {
            let st = self.sin_theta[i];
            let cot = self.cos_theta[i] / st;
            let k = lm_index(l, m);
            (self.dplm_row(i)[k] - cot * self.plm_row(i)[k]) / st
        });
        // f_λλ / sin²θ + cot θ f_θ
        let h_ll = self.synthesize_with(h, false, |i, l, m| {
            let st = self.sin_theta[i];
            let cot = self.cos_theta[i] / st;
            let k = lm_index(l, m);
            let mf = m as f64;
            -mf * mf * self.plm_row(i)[k] / (st * st) + cot * self.dplm_row(i)[k]
        });
        (h_tt, h_tl, h_ll)
    }
}

/// Real spherical-harmonic coefficients `(a_lm, b_lm)` up to `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonics {
    degree: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Harmonics {
    pub fn zeros(degree: usize) -> Self {
        let n = lm_count(degree);
        Self { degree, cos: vec![0.0; n], sin: vec![0.0; n] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(a_lm, b_lm)`; zero outside the stored range.
    pub fn get(&self, l: usize, m: usize) -> (f64, f64) {
        if l > self.degree || m > l {
            return (0.0, 0.0);
        }
        let k = lm_index(l, m);
        (self.cos[k], self.sin[k])
    }

    pub fn set(&mut self, l: usize, m: usize, a: f64, b: f64) {
        assert!(l <= self.degree && m <= l, "({l}, {m}) outside degree {}", self.degree);
        let k = lm_index(l, m);
        self.cos[k] = a;
        self.sin[k] = if m == 0 { 0.0 } else { b };
    }

    /// Adds `Re[(re + i·im) Y_lm]` for a complex harmonic `Y_lm`, any sign of `m`.
    pub fn add_complex(&mut self, l: usize, m: i64, re: f64, im: f64) {
        let ma = m.unsigned_abs() as usize;
        assert!(ma <= l && l <= self.degree, "({l}, {m}) outside degree {}", self.degree);
        let k = lm_index(l, ma);
        if ma == 0 {
            self.cos[k] += re;
        } else if m > 0 {
            self.cos[k] += re;
            self.sin[k] -= im;
        } else {
            let sign = if ma % 2 == 0 { 1.0 } else { -1.0 };
            self.cos[k] += sign * re;
            self.sin[k] += sign * im;
        }
    }

    /// `(l, m, re, im)` with `m ≥ 0` such that the field is `Re Σ (re + i·im) Y_lm`.
    pub fn to_complex(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::with_capacity(self.cos.len());
        for l in 0..=self.degree {
            for m in 0..=l {
                let (a, b) = self.get(l, m);
                out.push((l, m, a, if m == 0 { 0.0 } else { -b }));
            }
        }
        out
    }

    /// Multiplies every degree-`l` block by `f(l)`.
    pub fn map_degree(&mut self, f: impl Fn(usize) -> f64) {
        for l in 0..=self.degree {
            let g = f(l);
            for m in 0..=l {
                let k = lm_index(l, m);
                self.cos[k] *= g;
                self.sin[k] *= g;
            }
        }
    }

    /// Coefficients as one flat vector `[a..., b...]`.
    #[cfg(test)]
    pub(crate) fn as_flat(&self) -> Vec<f64> {
        let mut v = self.cos.clone();
        v.extend_from_slice(&self.sin);
        v
    }
}

/// Orthonormal associated Legendre functions with Condon–Shortley phase,
/// `∫ P̃_lm(cos θ)² · 2π sin θ dθ = 1`.
fn legendre_normalized(degree: usize, x: f64, sin_t: f64, out: &mut [f64]) {
    out[lm_index(0, 0)] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=degree {
        let mf = m as f64;
        out[lm_index(m, m)] =
            -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * out[lm_index(m - 1, m - 1)];
    }
    for m in 0..degree {
        let mf = m as f64;
        out[lm_index(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * x * out[lm_index(m, m)];
    }
    for m in 0..=degree {
        let mf = m as f64;
        for l in (m + 2)..=degree {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[lm_index(l, m)] = a * (x * out[lm_index(l - 1, m)] - b * out[lm_index(l - 2, m)]);
        }
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for k in 0..n.div_ceil(2) {
        let mut z = (PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_p(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_p(n, z);
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        x[k] = -z;
        x[n - 1 - k] = z;
        w[k] = wk;
        w[n - 1 - k] = wk;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre_p(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_band_limit() {
        assert!(matches!(SphereGrid::new(3), Err(QsbError::Config(_))));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        // exact through degree 13
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((int - 2.0 / 13.0).abs() < 1e-14);
        assert!(x.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn harmonics_are_orthonormal_under_quadrature() {
        let g = SphereGrid::new(4).unwrap();
        let deg = g.degree();
        for (l1, m1) in [(0, 0), (3, 2), (5, 5), (8, 1)] {
            for (l2, m2) in [(0, 0), (3, 2), (5, 5), (8, 1), (7, 2)] {
                let mut h1 = Harmonics::zeros(deg);
                h1.set(l1, m1, 1.0, 0.0);
                let mut h2 = Harmonics::zeros(deg);
                h2.set(l2, m2, 1.0, 0.0);
                let f1 = g.synthesize(&h1);
                let f2 = g.synthesize(&h2);
                let prod: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a * b).collect();
                let ip = g.quadrature(&prod);
                let expect = if (l1, m1) != (l2, m2) {
                    0.0
                } else if m1 == 0 {
                    1.0
                } else {
                    0.5
                };
                assert!((ip - expect).abs() < 1e-13, "({l1},{m1})·({l2},{m2}) = {ip}");
            }
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let g = SphereGrid::new(5).unwrap();
        let mut h = Harmonics::zeros(g.degree());
        for l in 0..=g.degree() {
            for m in 0..=l {
                h.set(l, m, ((l * 7 + m * 3) % 5) as f64 - 2.0, ((l + 2 * m) % 3) as f64 - 1.0);
            }
        }
        let back = g.analyze(&g.synthesize(&h));
        for (x, y) in h.as_flat().iter().zip(back.as_flat()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_derivative_matches_finite_difference() {
        // P̃_32 at θ vs. a central difference of the recurrence
        let deg = 6;
        let th: f64 = 0.7;
        let hstep = 1e-6;
        let mut p = vec![0.0; lm_count(deg)];
        let mut pp = vec![0.0; lm_count(deg)];
        let mut pm = vec![0.0; lm_count(deg)];
        legendre_normalized(deg, th.cos(), th.sin(), &mut p);
        legendre_normalized(deg, (th + hstep).cos(), (th + hstep).sin(), &mut pp);
        legendre_normalized(deg, (th - hstep).cos(), (th - hstep).sin(), &mut pm);
        for (l, m) in [(3usize, 2usize), (5, 0), (6, 6), (4, 1)] {
            let k = lm_index(l, m);
            let fd = (pp[k] - pm[k]) / (2.0 * hstep);
            let lf = l as f64;
            let mf = m as f64;
            let prev = if l > m { p[lm_index(l - 1, m)] } else { 0.0 };
            let c = if l > m {
                ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - mf * mf)).sqrt()
            } else {
                0.0
            };
            let an = (lf * th.cos() * p[k] - c * prev) / th.sin();
            assert!((fd - an).abs() < 1e-8, "({l},{m}): {fd} vs {an}");
        }
    }

    #[test]
    fn complex_convention_matches_real_part() {
        // Re Y_22 = P̃_22 cos 2λ; Re(i Y_22) = -P̃_22 sin 2λ; Y_{2,-2} = conj(Y_22).
        let mut h = Harmonics::zeros(4);
        h.add_complex(2, 2, 1.0, 0.0);
        assert_eq!(h.get(2, 2), (1.0, 0.0));
        let mut h = Harmonics::zeros(4);
        h.add_complex(2, 2, 0.0, 1.0);
        assert_eq!(h.get(2, 2), (0.0, -1.0));
        let mut h = Harmonics::zeros(4);
        h.add_complex(2, -2, 0.0, 1.0);
        assert_eq!(h.get(2, 2), (0.0, 1.0));
        let mut h = Harmonics::zeros(4);
        h.add_complex(3, -1, 1.0, 0.0);
        assert_eq!(h.get(3, 1), (-1.0, 0.0));
        let mut h = Harmonics::zeros(4);
        h.add_complex(3, 1, 0.5, -0.25);
        let round = h.to_complex();
        assert!(round.contains(&(3, 1, 0.5, -0.25)));
    }
}
