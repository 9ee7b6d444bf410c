//! Prescribed Gauss curvature: solve `Δ_o φ + K e^{2φ} = 1` for `φ`.
//!
//! Damped Newton on the harmonic coefficients of `φ`. The Jacobian
//! `Δ + 2K e^{2φ}` is assembled densely in the Galerkin sense (every basis
//! harmonic pushed through the grid) and solved by SVD, which copes with the
//! near-null Möbius directions that appear when `K` is close to constant.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{QsbError, Result};
use crate::field::ScalarField;
use crate::grid::{lm_count, Harmonics, SphereGrid};

#[derive(Debug, Clone)]
pub struct UniformizationSolution {
    pub phi: ScalarField,
    pub residual_sup: f64,
    pub iterations: usize,
    /// Sup-norm residual after each accepted iterate, starting with the
    /// initial guess.
    pub history: Vec<f64>,
}

fn residual(phi: &ScalarField, k: &ScalarField) -> ScalarField {
    let lap = phi.laplacian();
    let n = phi.len();
    let v = (0..n)
        .map(|i| lap.values()[i] + k.values()[i] * (2.0 * phi.values()[i]).exp() - 1.0)
        .collect();
    ScalarField::new(phi.grid().clone(), v).expect("finite residual")
}

/// Column layout of the unknowns: `a_lm` for all `(l, m)`, then `b_lm` for
/// `m ≥ 1`.
fn unknowns(degree: usize) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::with_capacity(2 * lm_count(degree));
    for l in 0..=degree {
        for m in 0..=l {
            out.push((l, m, false));
        }
    }
    for l in 1..=degree {
        for m in 1..=l {
            out.push((l, m, true));
        }
    }
    out
}

fn coeffs_to_vec(h: &Harmonics, layout: &[(usize, usize, bool)]) -> DVector<f64> {
    DVector::from_iterator(
        layout.len(),
        layout.iter().map(|&(l, m, s)| {
            let (a, b) = h.get(l, m);
            if s {
                b
            } else {
                a
            }
        }),
    )
}

fn vec_to_coeffs(v: &DVector<f64>, degree: usize, layout: &[(usize, usize, bool)]) -> Harmonics {
    let mut h = Harmonics::zeros(degree);
    for (i, &(l, m, s)) in layout.iter().enumerate() {
        let (a, b) = h.get(l, m);
        if s {
            h.set(l, m, a, v[i]);
        } else {
            h.set(l, m, v[i], b);
        }
    }
    h
}

fn jacobian(grid: &Arc<SphereGrid>, weight: &[f64], layout: &[(usize, usize, bool)]) -> DMatrix<f64> {
    let deg = grid.degree();
    let n = layout.len();
    let mut jac = DMatrix::zeros(n, n);
    for (col, &(l, m, s)) in layout.iter().enumerate() {
        let mut basis = Harmonics::zeros(deg);
        if s {
            basis.set(l, m, 0.0, 1.0);
        } else {
            basis.set(l, m, 1.0, 0.0);
        }
        let y = grid.synthesize(&basis);
        let prod: Vec<f64> = y.iter().zip(weight).map(|(a, w)| a * w).collect();
        let mut img = grid.analyze(&prod);
        let (a, b) = img.get(l, m);
        let lap = -((l * (l + 1)) as f64);
        if s {
            img.set(l, m, a, b + lap);
        } else {
            img.set(l, m, a + lap, b);
        }
        jac.set_column(col, &coeffs_to_vec(&img, layout));
    }
    jac
}

/// Solves `Δ_o φ + K e^{2φ} = 1` to `‖·‖_∞ ≤ tol` at the grid nodes. The
/// returned `φ` is unnormalized; pass it through
/// [`ConformalMetric::new`](crate::metric::ConformalMetric::new) with `r = 1`.
pub fn solve_conformal_factor(k: &ScalarField, tol: f64, max_iter: usize) -> Result<UniformizationSolution> {
    if !(tol > 0.0) {
        return Err(QsbError::Config(format!("tolerance {tol} must be positive")));
    }
    let min_k = k.min();
    if !(min_k > 0.0) {
        return Err(QsbError::NonPositiveCurvature { min_k });
    }
    let grid = k.grid().clone();
    let deg = grid.degree();
    let layout = unknowns(deg);

    let mean_k = k.integrate() / (4.0 * PI);
    let mut phi = ScalarField::constant(grid.clone(), -0.5 * mean_k.ln());
    let mut res = residual(&phi, k);
    let mut res_sup = res.sup_norm();
    let mut history = vec![res_sup];
    let mut iterations = 0;

    while res_sup > tol {
        if iterations >= max_iter {
            return Err(QsbError::SolverDiverged { iterations, residual: res_sup, history });
        }
        iterations += 1;
        let weight: Vec<f64> = k
            .values()
            .iter()
            .zip(phi.values())
            .map(|(kv, p)| 2.0 * kv * (2.0 * p).exp())
            .collect();
        let jac = jacobian(&grid, &weight, &layout);
        let rhs = -coeffs_to_vec(&res.harmonics(), &layout);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&rhs, 1e-11 * smax)
            .map_err(|_| QsbError::SolverDiverged { iterations, residual: res_sup, history: history.clone() })?;
        let dphi = ScalarField::from_harmonics(grid.clone(), &vec_to_coeffs(&step, deg, &layout));

        // Backtracking on the sup-norm residual; only decreasing steps are
        // accepted.
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = phi.lin_comb(1.0, &dphi, lam);
            let r = residual(&trial, k);
            let rs = r.sup_norm();
            if rs < res_sup {
                accepted = Some((trial, r, rs));
                break;
            }
            lam *= 0.5;
        }
        match accepted {
            Some((p, r, rs)) => {
                phi = p;
                res = r;
                res_sup = rs;
                history.push(rs);
            }
            None => {
                return Err(QsbError::SolverDiverged { iterations, residual: res_sup, history });
            }
        }
    }
    Ok(UniformizationSolution { phi, residual_sup: res_sup, iterations, history })
}

/// Balancing vector `(1/4π) ∫ x_i e^{2φ} dμ_o`. Diagnostic only.
pub fn center_of_mass(phi: &ScalarField) -> [f64; 3] {
    let grid = phi.grid();
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let f = ScalarField::from_cartesian(grid.clone(), |x| x[i])
            .zip_map(phi, |x, p| x * (2.0 * p).exp());
        *o = f.integrate() / (4.0 * PI);
    }
    out
}
