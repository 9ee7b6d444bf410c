//! Subcommand bodies. Each returns the JSON document for stdout or `--out`
//! and writes any side artifacts itself.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use qsb_core::bound::{bound_theorem, zeta_upper, MassBoundReport};
use qsb_core::extension::{default_rep, evolve, verify_monotonicity, ExtensionConfig};
use qsb_core::fillin::{lambda_lower_from_metric, lambda_lower_general};
use qsb_core::io::{fmt17, read_field_csv, write_field_csv};
use qsb_core::path::{build_path_table_with, PathTable};
use qsb_core::uniformization::{center_of_mass, solve_conformal_factor};
use qsb_core::{BoundaryData, ConformalMetric, QsbError, SphereGrid};

use crate::config::{read_err, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Core(QsbError),
    Write(PathBuf, std::io::Error),
}

impl From<QsbError> for CliError {
    fn from(e: QsbError) -> Self {
        Self::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(QsbError::Config(_)) => 2,
            _ => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Core(e) => e.name(),
            Self::Write(..) => "IoError",
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": self.name(), "message": self.to_string() })
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Core(e) => write!(f, "{e}"),
            Self::Write(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Write(path.to_path_buf(), e))
}

/// Writes `write` to `path`, mapping I/O failures to exit code 3.
pub fn write_with(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    write(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Write(path.to_path_buf(), e))
}

pub fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    write_with(path, |w| writeln!(w, "{}", render(v)))
}

pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

fn table(cfg: &RunConfig, b: &BoundaryData) -> CliResult<PathTable> {
    Ok(build_path_table_with(b.metric(), cfg.path_nodes, cfg.gauge_tol, cfg.interpolation()?)?)
}

fn with_config(mut doc: Map<String, Value>, cfg: &RunConfig) -> Value {
    doc.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    Value::Object(doc)
}

fn object(v: impl serde::Serialize) -> Map<String, Value> {
    match serde_json::to_value(v).expect("report serializes") {
        Value::Object(m) => m,
        _ => unreachable!("reports are structs"),
    }
}

fn bound_report(cfg: &RunConfig) -> CliResult<(BoundaryData, PathTable, MassBoundReport)> {
    let (b, sol) = cfg.boundary()?;
    let table = table(cfg, &b)?;
    let (mut report, _) = MassBoundReport::compute(&b, &table, cfg.family()?, cfg.reparam.budget)?;
    let tol = &mut report.tolerances;
    tol.insert("gauge_tol".into(), cfg.gauge_tol);
    tol.insert("max_gauge_residual".into(), table.max_gauge_residual());
    if let Some(sol) = sol {
        tol.insert("uniformization_tol".into(), cfg.uniformization_tol);
        tol.insert("uniformization_residual".into(), sol.residual_sup);
    }
    Ok((b, table, report))
}

pub fn bound(cfg: &RunConfig) -> CliResult<Value> {
    let (_, _, report) = bound_report(cfg)?;
    Ok(with_config(object(&report), cfg))
}

pub fn zeta(cfg: &RunConfig) -> CliResult<Value> {
    let (b, _) = cfg.boundary()?;
    let table = table(cfg, &b)?;
    let mut doc = Map::new();
    doc.insert("zeta_upper".into(), json!(zeta_upper(&table)?));
    doc.insert("kappa".into(), json!(b.metric().kappa_ratio().ok()));
    doc.insert("calH".into(), json!(b.cal_h()));
    doc.insert("max_gauge_residual".into(), json!(table.max_gauge_residual()));
    Ok(with_config(doc, cfg))
}

pub fn extend(cfg: &RunConfig, series: Option<&Path>) -> CliResult<Value> {
    let (b, table, mut report) = bound_report(cfg)?;
    let theorem = bound_theorem(&table, &b)?;
    let mut ext = ExtensionConfig::new(b, default_rep(&theorem));
    ext.s_max = cfg.extension.s_max;
    ext.tol = cfg.extension.tol;
    ext.h_max = cfg.extension.h_max;
    ext.h_init = cfg.extension.h_init;
    ext.gauge_tol = cfg.gauge_tol;
    let res = evolve(&ext)?;
    let fit = res.mass_fit()?;
    report.extension_mass = Some(fit.mass);
    report.tolerances.insert("extension_tol".into(), cfg.extension.tol);

    if let Some(path) = series {
        let mono = verify_monotonicity(&res);
        write_with(path, |w| {
            writeln!(w, "s,calH,minv,maxv,mono_residual")?;
            for (x, r) in res.samples.iter().zip(&mono.residuals) {
                let r = r.map(fmt17).unwrap_or_default();
                writeln!(w, "{},{},{},{},{}", fmt17(x.s), fmt17(x.cal_h), fmt17(x.min_v), fmt17(x.max_v), r)?;
            }
            Ok(())
        })?;
    }

    let mut doc = object(&report);
    doc.insert("fit_residual".into(), json!(fit.fit_residual));
    doc.insert("s_max".into(), json!(res.s_max));
    doc.insert("steps".into(), json!(res.steps));
    doc.insert("rejected_steps".into(), json!(res.rejected));
    doc.insert("m_q".into(), json!(fit.m_q));
    Ok(with_config(doc, cfg))
}

pub fn path(cfg: &RunConfig, out: &Path) -> CliResult<Value> {
    let (b, _) = cfg.boundary()?;
    let table = table(cfg, &b)?;
    write_with(out, |w| {
        writeln!(w, "t,c,alpha,beta,gauge_residual")?;
        for p in table.samples() {
            writeln!(w, "{},{},{},{},{}", fmt17(p.t), fmt17(p.c), fmt17(p.alpha), fmt17(p.beta), fmt17(p.gauge_residual))?;
        }
        Ok(())
    })?;
    let mut doc = Map::new();
    doc.insert("nodes".into(), json!(table.len()));
    doc.insert("max_gauge_residual".into(), json!(table.max_gauge_residual()));
    Ok(with_config(doc, cfg))
}

pub fn lambda_from_config(cfg: &RunConfig) -> CliResult<Value> {
    let (b, _) = cfg.boundary()?;
    Ok(Value::Object(object(lambda_lower_from_metric(b.metric())?)))
}

pub fn lambda_direct(n: usize, r: f64, min_r: f64) -> CliResult<Value> {
    Ok(Value::Object(object(lambda_lower_general(n, r, min_r)?)))
}

/// Band limit of a grid CSV, from its node count `8 (L + 1)²`.
fn band_limit_of(rows: usize) -> Option<usize> {
    let l1 = ((rows / 8) as f64).sqrt().round() as usize;
    (l1 >= 1 && 8 * l1 * l1 == rows).then(|| l1 - 1)
}

pub struct UniformizeArgs<'a> {
    pub k: &'a Path,
    pub tol: f64,
    pub max_iter: usize,
    pub out: &'a Path,
    pub history: &'a Path,
}

pub fn uniformize(a: &UniformizeArgs) -> CliResult<Value> {
    let text = std::fs::read_to_string(a.k).map_err(|e| read_err(a.k, e))?;
    let rows = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).count();
    let l = band_limit_of(rows.saturating_sub(1)).ok_or_else(|| {
        QsbError::InvalidField(format!("{} rows do not form a grid of size 8(L+1)²", rows.saturating_sub(1)))
    })?;
    let grid = std::sync::Arc::new(SphereGrid::new(l)?);
    let k = read_field_csv(grid, text.as_bytes())?;

    let write_history = |h: &[f64]| {
        write_with(a.history, |w| {
            writeln!(w, "iteration,residual_sup")?;
            for (i, r) in h.iter().enumerate() {
                writeln!(w, "{i},{}", fmt17(*r))?;
            }
            Ok(())
        })
    };
    let sol = match solve_conformal_factor(&k, a.tol, a.max_iter) {
        Ok(sol) => sol,
        Err(e) => {
            if let QsbError::SolverDiverged { history, .. } = &e {
                write_history(history)?;
            }
            return Err(e.into());
        }
    };
    write_history(&sol.history)?;
    let metric = ConformalMetric::new(sol.phi.clone(), 1.0)?;
    write_with(a.out, |w| write_field_csv(metric.phi(), w))?;
    Ok(json!({
        "band_limit": l,
        "r": metric.r(),
        "residual_sup": sol.residual_sup,
        "iterations": sol.iterations,
        "center_of_mass": center_of_mass(metric.phi()),
    }))
}
