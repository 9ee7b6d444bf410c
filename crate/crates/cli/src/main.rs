//! `qsb`: mass bounds, extension runs and fill-in bounds from TOML configs.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 solver or
//! output error. Failures print `{"error": <variant>, "message": ...}`.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::{CliError, CliResult};
use config::RunConfig;
use qsb_core::QsbError;

#[derive(Parser)]
#[command(name = "qsb", version, about = "Quasi-spherical upper bounds for the Bartnik mass")]
struct Cli {
    /// Worker threads for multiple configs; QSB_THREADS overrides.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Configs {
    /// One or more run configurations. With several, reports go to stdout in
    /// the given order, one per line.
    #[arg(long = "config", required = true, num_args = 1..)]
    config: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound report: ζ̂, closed-form bounds and the optimized bound.
    Bound {
        #[command(flatten)]
        configs: Configs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `reparam.family`.
        #[arg(long)]
        family: Option<String>,
        /// Overrides `reparam.budget`.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Roundness functional ζ̂ alone.
    Zeta {
        #[command(flatten)]
        configs: Configs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound report plus the numerical extension and its fitted mass.
    Extend {
        #[command(flatten)]
        configs: Configs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of s, calH, minv, maxv, mono_residual.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Fill-in lower bound, from a config or from `--n --r --minR`.
    Lambda {
        #[arg(long, conflicts_with_all = ["n", "r", "min_r"])]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, required_unless_present = "config")]
        r: Option<f64>,
        #[arg(long = "minR", required_unless_present = "config")]
        min_r: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conformal factor with prescribed Gauss curvature from a grid CSV.
    Uniformize {
        #[arg(long = "K")]
        k: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
        /// Residual history CSV; defaults to `<out stem>_history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Path table with columns t, c, alpha, beta, gauge_residual.
    Path {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn threads(jobs: usize) -> usize {
    std::env::var("QSB_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(jobs).max(1)
}

/// Runs `f` on every config with up to `jobs` threads; results keep the
/// input order.
fn run_all<F>(paths: &[PathBuf], jobs: usize, f: F) -> Vec<CliResult<Value>>
where
    F: Fn(&Path) -> CliResult<Value> + Sync,
{
    let mut out: Vec<Option<CliResult<Value>>> = (0..paths.len()).map(|_| None).collect();
    for (chunk_paths, chunk_out) in paths.chunks(jobs).zip(out.chunks_mut(jobs)) {
        std::thread::scope(|s| {
            for (p, slot) in chunk_paths.iter().zip(chunk_out.iter_mut()) {
                let f = &f;
                s.spawn(move || *slot = Some(f(p)));
            }
        });
    }
    out.into_iter().map(|r| r.expect("every job ran")).collect()
}

fn emit(result: CliResult<Value>, out: Option<&Path>) -> i32 {
    match result.and_then(|v| match out {
        Some(p) => commands::write_json(p, &v),
        None => {
            println!("{}", commands::render(&v));
            Ok(())
        }
    }) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qsb: {e}");
            let doc = e.to_json();
            // Solver failures still leave a report with the error key.
            if let (Some(p), CliError::Core(_)) = (out, &e) {
                let _ = commands::write_json(p, &doc);
            }
            println!("{}", serde_json::to_string(&doc).expect("error serializes"));
            e.exit_code()
        }
    }
}

fn batch(
    paths: &[PathBuf],
    out: Option<&Path>,
    jobs: usize,
    f: impl Fn(&RunConfig) -> CliResult<Value> + Sync,
) -> i32 {
    if paths.len() > 1 && out.is_some() {
        let e = CliError::Core(QsbError::Config("--out needs a single --config".into()));
        return emit(Err(e), None);
    }
    let results = run_all(paths, jobs, |p| f(&RunConfig::load(p)?));
    if paths.len() == 1 {
        return emit(results.into_iter().next().expect("one result"), out);
    }
    let mut code = 0;
    for r in results {
        let c = match r {
            Ok(v) => {
                println!("{}", serde_json::to_string(&v).expect("report serializes"));
                0
            }
            Err(e) => emit(Err(e), None),
        };
        code = code.max(c);
    }
    code
}

fn history_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "phi".into());
    out.with_file_name(format!("{stem}_history.csv"))
}

fn run(cli: Cli) -> i32 {
    let jobs = threads(cli.jobs);
    match cli.command {
        Command::Bound { configs, out, family, budget } => batch(&configs.config, out.as_deref(), jobs, |cfg| {
            let mut cfg = cfg.clone();
            if let Some(f) = &family {
                cfg.reparam.family = f.clone();
            }
            if let Some(b) = budget {
                cfg.reparam.budget = b;
            }
            cfg.validate()?;
            commands::bound(&cfg)
        }),
        Command::Zeta { configs, out } => batch(&configs.config, out.as_deref(), jobs, commands::zeta),
        Command::Extend { configs, out, series } => {
            if configs.config.len() > 1 && series.is_some() {
                let e = CliError::Core(QsbError::Config("--series needs a single --config".into()));
                return emit(Err(e), None);
            }
            batch(&configs.config, out.as_deref(), jobs, |cfg| commands::extend(cfg, series.as_deref()))
        }
        Command::Lambda { config, n, r, min_r, out } => {
            let result = match (config, r, min_r) {
                (Some(p), _, _) => RunConfig::load(&p).map_err(CliError::from).and_then(|c| commands::lambda_from_config(&c)),
                (None, Some(r), Some(m)) => commands::lambda_direct(n, r, m),
                _ => Err(QsbError::Config("lambda needs --config or --r and --minR".into()).into()),
            };
            emit(result, out.as_deref())
        }
        Command::Uniformize { k, tol, max_iter, out, history } => {
            let history = history.unwrap_or_else(|| history_path(&out));
            let args = commands::UniformizeArgs { k: &k, tol, max_iter, out: &out, history: &history };
            emit(commands::uniformize(&args), None)
        }
        Command::Path { config, out } => {
            let result = RunConfig::load(&config).map_err(CliError::from).and_then(|c| commands::path(&c, &out));
            emit(result, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli) as u8)
}
