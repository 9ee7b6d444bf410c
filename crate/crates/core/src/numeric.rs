//! Small numerical kernels shared across modules.

use std::f64::consts::PI;

use crate::grid::gauss_legendre;

/// Pairwise (cascade) summation in index order. The result depends only on
/// the input order, never on thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Chebyshev–Lobatto points mapped to `[0, 1]`, ascending, endpoints included.
pub fn chebyshev_lobatto_unit(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut t: Vec<f64> = (0..n)
        .map(|j| 0.5 * (1.0 - (PI * j as f64 / (n - 1) as f64).cos()))
        .collect();
    t[0] = 0.0;
    t[n - 1] = 1.0;
    t
}

/// Barycentric Lagrange interpolant through arbitrary distinct nodes.
/// Well conditioned on Chebyshev-type node sets.
#[derive(Debug, Clone)]
pub struct BaryInterp {
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl BaryInterp {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        let weights = bary_weights(&nodes);
        assert_eq!(nodes.len(), values.len());
        Self { nodes, values, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((xj, fj), wj) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = x - xj;
            if d == 0.0 {
                return *fj;
            }
            let c = wj / d;
            num += c * fj;
            den += c;
        }
        num / den
    }

    /// Cardinal-function values `ℓ_j(x)`, so that `p(x) = Σ ℓ_j(x) f_j` for
    /// any data on the same nodes.
    pub fn cardinals(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            out[j] = 1.0;
            return out;
        }
        let mut den = 0.0;
        for (j, (xj, wj)) in self.nodes.iter().zip(&self.weights).enumerate() {
            out[j] = wj / (x - xj);
            den += out[j];
        }
        for o in &mut out {
            *o /= den;
        }
        out
    }
}

/// Barycentric weights `1 / Π_{k≠j} (x_j − x_k)`, rescaled to unit max.
fn bary_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let span = x.iter().fold(0.0f64, |a, &b| a.max(b)) - x.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    // Scale differences by 4/span to keep the products in range.
    let scale = if span > 0.0 { 4.0 / span } else { 1.0 };
    let mut w: Vec<f64> = (0..n)
        .map(|j| {
            let mut p = 1.0;
            for k in 0..n {
                if k != j {
                    p *= (x[j] - x[k]) * scale;
                }
            }
            1.0 / p
        })
        .collect();
    let m = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for v in &mut w {
        *v /= m;
    }
    w
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && n == y.len());
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Self { x, y, d };
        }
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { x, y, d }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Fixed Gauss–Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self { x, w }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Nodes and weights on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.x.iter().zip(&self.w).map(move |(x, w)| (c + r * x, r * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Golden-section minimization of a unimodal `f` on `[a, b]` using at most
/// `max_evals` evaluations. Returns `(x_min, f_min)`.
pub fn golden_section(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    max_evals: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while evals < max_evals && (b - a).abs() > 1e-12 * (1.0 + a.abs() + b.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
