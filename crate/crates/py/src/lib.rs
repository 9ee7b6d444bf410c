//! Python module `qsb`: grids, fields, metrics, path tables, bounds and the
//! extension run.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qsb_core::bound::{self, Family, MassBoundReport};
use qsb_core::extension::{default_rep, evolve, verify_monotonicity, ExtensionConfig};
use qsb_core::fillin;
use qsb_core::io::harmonics_from_terms;
use qsb_core::path::{build_path_table, PathTable as CorePathTable};
use qsb_core::uniformization;

create_exception!(qsb, QsbError, PyException, "Raised for any error from the numerical core.");

fn err(e: qsb_core::QsbError) -> PyErr {
    QsbError::new_err(format!("{}: {e}", e.name()))
}

/// Parses a serializable value into Python objects through `json.loads`.
fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| QsbError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct SphereGrid(Arc<qsb_core::SphereGrid>);

#[pymethods]
impl SphereGrid {
    #[new]
    fn new(band_limit: usize) -> PyResult<Self> {
        Ok(Self(Arc::new(qsb_core::SphereGrid::new(band_limit).map_err(err)?)))
    }

    #[getter]
    fn band_limit(&self) -> usize {
        self.0.band_limit()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    /// Colatitudes of the Gauss rings.
    fn theta(&self) -> Vec<f64> {
        self.0.theta().to_vec()
    }

    /// Equispaced longitudes.
    fn longitude(&self) -> Vec<f64> {
        self.0.lambda().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("SphereGrid(band_limit={})", self.0.band_limit())
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct ScalarField(qsb_core::ScalarField);

#[pymethods]
impl ScalarField {
    /// Node values in ring-major order.
    #[new]
    fn new(grid: &SphereGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self(qsb_core::ScalarField::new(grid.0.clone(), values).map_err(err)?))
    }

    #[staticmethod]
    fn constant(grid: &SphereGrid, c: f64) -> Self {
        Self(qsb_core::ScalarField::constant(grid.0.clone(), c))
    }

    /// Sum of complex harmonics from `(l, m, re, im)` tuples.
    #[staticmethod]
    fn from_harmonics(grid: &SphereGrid, terms: Vec<(usize, i64, f64, f64)>) -> PyResult<Self> {
        let h = harmonics_from_terms(&terms, grid.0.degree()).map_err(err)?;
        Ok(Self(qsb_core::ScalarField::from_harmonics(grid.0.clone(), &h)))
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn laplacian(&self) -> Self {
        Self(self.0.laplacian())
    }

    fn integrate(&self) -> f64 {
        self.0.integrate()
    }

    fn min(&self) -> f64 {
        self.0.min()
    }

    fn max(&self) -> f64 {
        self.0.max()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct ConformalMetric(qsb_core::ConformalMetric);

#[pymethods]
impl ConformalMetric {
    /// `γ = r² e^{2φ} σ_o`, normalized to area radius `r_γ`.
    #[new]
    fn new(phi: &ScalarField, r: f64) -> PyResult<Self> {
        Ok(Self(qsb_core::ConformalMetric::new(phi.0.clone(), r).map_err(err)?))
    }

    #[staticmethod]
    fn round(grid: &SphereGrid, r: f64) -> Self {
        Self(qsb_core::ConformalMetric::round(grid.0.clone(), r))
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }

    #[getter]
    fn phi(&self) -> ScalarField {
        ScalarField(self.0.phi().clone())
    }

    #[getter]
    fn area(&self) -> f64 {
        self.0.area()
    }

    fn gauss_curvature(&self) -> ScalarField {
        ScalarField(self.0.gauss_curvature())
    }

    fn kappa_ratio(&self) -> PyResult<f64> {
        self.0.kappa_ratio().map_err(err)
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct BoundaryData(qsb_core::BoundaryData);

#[pymethods]
impl BoundaryData {
    #[new]
    fn new(metric: &ConformalMetric, h: &ScalarField) -> PyResult<Self> {
        Ok(Self(qsb_core::BoundaryData::new(metric.0.clone(), h.0.clone()).map_err(err)?))
    }

    #[getter]
    fn metric(&self) -> ConformalMetric {
        ConformalMetric(self.0.metric().clone())
    }

    /// `ℋ = (r/8π) ∫ H e^{2φ} dμ_o`.
    #[getter]
    fn cal_h(&self) -> f64 {
        self.0.cal_h()
    }
}

#[pyclass(frozen, skip_from_py_object)]
struct PathTable(CorePathTable);

#[pymethods]
impl PathTable {
    #[new]
    #[pyo3(signature = (metric, nodes = 17, gauge_tol = 1e-8))]
    fn new(py: Python<'_>, metric: &ConformalMetric, nodes: usize, gauge_tol: f64) -> PyResult<Self> {
        let m = metric.0.clone();
        let table = py.detach(move || build_path_table(&m, nodes, gauge_tol)).map_err(err)?;
        Ok(Self(table))
    }

    fn t(&self) -> Vec<f64> {
        self.0.t().to_vec()
    }

    fn alpha(&self) -> Vec<f64> {
        self.0.alpha().to_vec()
    }

    fn beta(&self) -> Vec<f64> {
        self.0.beta().to_vec()
    }

    fn max_gauge_residual(&self) -> f64 {
        self.0.max_gauge_residual()
    }
}

#[pyfunction]
fn zeta_upper(table: &PathTable) -> PyResult<f64> {
    bound::zeta_upper(&table.0).map_err(err)
}

#[pyfunction]
fn bound_theorem(table: &PathTable, boundary: &BoundaryData) -> PyResult<f64> {
    Ok(bound::bound_theorem(&table.0, &boundary.0).map_err(err)?.value)
}

#[pyfunction]
fn bound_half_r(boundary: &BoundaryData) -> f64 {
    bound::bound_half_r(&boundary.0)
}

/// Report dictionary with the same keys as the CLI `bound` output.
#[pyfunction]
#[pyo3(signature = (boundary, table, family = "ode_sqrt", budget = 200))]
fn mass_bound_report<'py>(
    py: Python<'py>,
    boundary: &BoundaryData,
    table: &PathTable,
    family: &str,
    budget: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let fam = Family::from_name(family).ok_or_else(|| QsbError::new_err(format!("unknown family {family:?}")))?;
    let (report, _) = py.detach(|| MassBoundReport::compute(&boundary.0, &table.0, fam, budget)).map_err(err)?;
    to_py(py, &report)
}

/// Integrates the lapse equation with the theorem reparameterization and
/// fits the exterior mass.
#[pyfunction]
#[pyo3(signature = (boundary, table, s_max = 1e3, tol = 1e-10, h_max = 0.02))]
fn extend<'py>(
    py: Python<'py>,
    boundary: &BoundaryData,
    table: &PathTable,
    s_max: f64,
    tol: f64,
    h_max: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (res, fit, mono) = py
        .detach(|| {
            let th = bound::bound_theorem(&table.0, &boundary.0)?;
            let mut cfg = ExtensionConfig::new(boundary.0.clone(), default_rep(&th));
            cfg.s_max = s_max;
            cfg.tol = tol;
            cfg.h_max = h_max;
            let res = evolve(&cfg)?;
            let fit = res.mass_fit()?;
            let mono = verify_monotonicity(&res);
            Ok((res, fit, mono))
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mass", fit.mass)?;
    d.set_item("fit_residual", fit.fit_residual)?;
    d.set_item("m_q", fit.m_q)?;
    d.set_item("steps", res.steps)?;
    d.set_item("s", res.s())?;
    d.set_item("calH", res.cal_h())?;
    d.set_item("min_v", res.min_v)?;
    d.set_item("worst_mono_residual", mono.worst_residual)?;
    Ok(d)
}

#[pyfunction]
fn lambda_lower(n: usize, r: f64, min_r: f64) -> PyResult<f64> {
    Ok(fillin::lambda_lower_general(n, r, min_r).map_err(err)?.lambda_lower)
}

/// Solves `Δφ + K e^{2φ} = 1`; returns `(φ, residual_sup, iterations)`.
#[pyfunction]
#[pyo3(signature = (k, tol = 1e-10, max_iter = 50))]
fn solve_conformal_factor(py: Python<'_>, k: &ScalarField, tol: f64, max_iter: usize) -> PyResult<(ScalarField, f64, usize)> {
    let sol = py.detach(|| uniformization::solve_conformal_factor(&k.0, tol, max_iter)).map_err(err)?;
    Ok((ScalarField(sol.phi), sol.residual_sup, sol.iterations))
}

#[pymodule]
fn qsb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QsbError", m.py().get_type::<QsbError>())?;
    m.add_class::<SphereGrid>()?;
    m.add_class::<ScalarField>()?;
    m.add_class::<ConformalMetric>()?;
    m.add_class::<BoundaryData>()?;
    m.add_class::<PathTable>()?;
    m.add_function(wrap_pyfunction!(zeta_upper, m)?)?;
    m.add_function(wrap_pyfunction!(bound_theorem, m)?)?;
    m.add_function(wrap_pyfunction!(bound_half_r, m)?)?;
    m.add_function(wrap_pyfunction!(mass_bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(extend, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_lower, m)?)?;
    m.add_function(wrap_pyfunction!(solve_conformal_factor, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_schwarzschild_through_bindings() {
        Python::attach(|py| {
            let g = SphereGrid::new(4).unwrap();
            let m = ConformalMetric::round(&g, 1.0);
            let b = BoundaryData::new(&m, &ScalarField::constant(&g, 2f64.sqrt())).unwrap();
            let table = PathTable::new(py, &m, 9, 1e-8).unwrap();
            assert!((bound_theorem(&table, &b).unwrap() - 0.25).abs() < 1e-12);
            let report = mass_bound_report(py, &b, &table, "affine_density", 50).unwrap();
            let zeta: f64 = report.get_item("zeta_upper").unwrap().extract().unwrap();
            assert_eq!(zeta, 0.0);
        });
    }

    #[test]
    fn core_errors_carry_the_variant_name() {
        Python::attach(|py| {
            let g = SphereGrid::new(4).unwrap();
            let m = ConformalMetric::round(&g, 1.0);
            let e = BoundaryData::new(&m, &ScalarField::constant(&g, -1.0)).err().unwrap();
            assert!(e.is_instance_of::<QsbError>(py));
            assert!(e.to_string().contains("ContractViolation"));
        });
    }
}
