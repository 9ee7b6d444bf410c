//! TOML run configuration and its resolution into boundary data.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use qsb_core::bound::Family;
use qsb_core::io::{harmonics_from_terms, read_field_csv};
use qsb_core::path::Interpolation;
use qsb_core::uniformization::{solve_conformal_factor, UniformizationSolution};
use qsb_core::{BoundaryData, ConformalMetric, QsbError, Result, ScalarField, SphereGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub l: usize,
    pub m: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// A scalar field given as a constant, a harmonic list or a grid CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<Vec<Term>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_harmonics: Option<Vec<Term>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_grid_file: Option<PathBuf>,
    #[serde(rename = "K_target", skip_serializing_if = "Option::is_none")]
    pub k_target: Option<FieldSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReparamSpec {
    pub family: String,
    pub budget: usize,
}

impl Default for ReparamSpec {
    fn default() -> Self {
        Self { family: "ode_sqrt".into(), budget: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtensionSpec {
    pub s_max: f64,
    pub tol: f64,
    pub h_max: f64,
    pub h_init: f64,
}

impl Default for ExtensionSpec {
    fn default() -> Self {
        Self { s_max: 1e3, tol: 1e-10, h_max: 0.02, h_init: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::band_limit")]
    pub band_limit: usize,
    #[serde(default = "defaults::path_nodes")]
    pub path_nodes: usize,
    #[serde(default = "defaults::interpolation")]
    pub interpolation: String,
    #[serde(default = "defaults::gauge_tol")]
    pub gauge_tol: f64,
    #[serde(default = "defaults::uniformization_tol")]
    pub uniformization_tol: f64,
    #[serde(default = "defaults::uniformization_max_iter")]
    pub uniformization_max_iter: usize,
    pub metric: MetricSpec,
    #[serde(rename = "H")]
    pub h: FieldSpec,
    #[serde(default)]
    pub reparam: ReparamSpec,
    #[serde(default)]
    pub extension: ExtensionSpec,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

mod defaults {
    pub fn band_limit() -> usize {
        8
    }
    pub fn path_nodes() -> usize {
        17
    }
    pub fn interpolation() -> String {
        "chebyshev".into()
    }
    pub fn gauge_tol() -> f64 {
        1e-8
    }
    pub fn uniformization_tol() -> f64 {
        1e-10
    }
    pub fn uniformization_max_iter() -> usize {
        50
    }
}

fn config_err(msg: impl Into<String>) -> QsbError {
    QsbError::Config(msg.into())
}

/// Reading a referenced input file failed.
pub fn read_err(path: &Path, e: impl std::fmt::Display) -> QsbError {
    config_err(format!("cannot read {}: {e}", path.display()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| read_err(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.metric;
        let given = [m.phi_harmonics.is_some(), m.phi_grid_file.is_some(), m.k_target.is_some()];
        if given.iter().filter(|&&x| x).count() != 1 {
            return Err(config_err("[metric] needs exactly one of phi_harmonics, phi_grid_file, K_target"));
        }
        match (&m.k_target, m.r) {
            (Some(k), None) => k.validate("metric.K_target")?,
            (Some(_), Some(_)) => return Err(config_err("metric.r is fixed by K_target and must be omitted")),
            (None, Some(r)) if r > 0.0 && r.is_finite() => {}
            (None, r) => return Err(config_err(format!("metric.r = {r:?} must be a positive number"))),
        }
        self.h.validate("H")?;
        for (name, v) in [
            ("gauge_tol", self.gauge_tol),
            ("uniformization_tol", self.uniformization_tol),
            ("extension.s_max", self.extension.s_max),
            ("extension.tol", self.extension.tol),
            ("extension.h_max", self.extension.h_max),
            ("extension.h_init", self.extension.h_init),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} = {v} must be positive")));
            }
        }
        self.family()?;
        self.interpolation()?;
        if self.reparam.budget == 0 {
            return Err(config_err("reparam.budget must be positive"));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Family> {
        Family::from_name(&self.reparam.family)
            .ok_or_else(|| config_err(format!("unknown reparam.family {:?}", self.reparam.family)))
    }

    pub fn interpolation(&self) -> Result<Interpolation> {
        Interpolation::from_name(&self.interpolation)
            .ok_or_else(|| config_err(format!("unknown interpolation {:?}", self.interpolation)))
    }

    pub fn grid(&self) -> Result<Arc<SphereGrid>> {
        Ok(Arc::new(SphereGrid::new(self.band_limit)?))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Builds `(γ, H)`; with `K_target` the uniformization solution is
    /// returned as well.
    pub fn boundary(&self) -> Result<(BoundaryData, Option<UniformizationSolution>)> {
        let grid = self.grid()?;
        let m = &self.metric;
        let (metric, sol) = if let Some(terms) = &m.phi_harmonics {
            let phi = harmonic_field(&grid, terms)?;
            (ConformalMetric::new(phi, m.r.expect("validated"))?, None)
        } else if let Some(p) = &m.phi_grid_file {
            let phi = self.grid_field(&grid, p)?;
            (ConformalMetric::new(phi, m.r.expect("validated"))?, None)
        } else {
            let k = self.field(&grid, m.k_target.as_ref().expect("validated"))?;
            let sol = solve_conformal_factor(&k, self.uniformization_tol, self.uniformization_max_iter)?;
            (ConformalMetric::new(sol.phi.clone(), 1.0)?, Some(sol))
        };
        let h = self.field(&grid, &self.h)?;
        Ok((BoundaryData::new(metric, h)?, sol))
    }

    pub fn field(&self, grid: &Arc<SphereGrid>, spec: &FieldSpec) -> Result<ScalarField> {
        if let Some(c) = spec.constant {
            Ok(ScalarField::constant(grid.clone(), c))
        } else if let Some(terms) = &spec.harmonics {
            harmonic_field(grid, terms)
        } else {
            self.grid_field(grid, spec.grid_file.as_ref().expect("validated"))
        }
    }

    fn grid_field(&self, grid: &Arc<SphereGrid>, p: &Path) -> Result<ScalarField> {
        let path = self.resolve(p);
        let f = File::open(&path).map_err(|e| read_err(&path, e))?;
        read_field_csv(grid.clone(), f)
    }
}

impl FieldSpec {
    fn validate(&self, name: &str) -> Result<()> {
        let given = [self.constant.is_some(), self.harmonics.is_some(), self.grid_file.is_some()];
        if given.iter().filter(|&&x| x).count() != 1 {
            return Err(config_err(format!("{name} needs exactly one of constant, harmonics, grid_file")));
        }
        Ok(())
    }
}

pub fn harmonic_field(grid: &Arc<SphereGrid>, terms: &[Term]) -> Result<ScalarField> {
    let t: Vec<_> = terms.iter().map(|t| (t.l, t.m, t.re, t.im)).collect();
    let h = harmonics_from_terms(&t, grid.degree())?;
    Ok(ScalarField::from_harmonics(grid.clone(), &h))
}
