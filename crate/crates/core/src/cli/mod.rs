//! Command-line front end: config merging, data ingest, dispatch and
//! deterministic output files.

mod io;
mod params;

pub use io::{ingest_csv, parse_csv, read_edges, read_omega_grid, IngestOptions, Ingested};
pub use params::{parse_config_text, Params};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evaluation::{
    cv_loss, default_lambda_path, recovery_metrics, run_coverage_experiment, run_recovery_experiment, run_scaling_experiment,
    simulation_lambda, CoverageConfig, CvFitConfig, CvMode, FitMethod, PrRow, RecoveryConfig, ScalingConfig,
};
use crate::inference::{confidence_band, RateMode};
use crate::kernels::{Bandwidth, BandwidthRegime, KernelKind};
use crate::local_moments::{local_covariance_field, Centering, CovarianceField, IndexGrid, IndexedSample};
use crate::solvers::{
    ccs_objective, fit_admm, fit_prisma, fit_prisma_screened, lambda_grid, lambda_max, screen_components, AdmmConfig, BetaSchedule,
    PrecisionField, SolveReport, SolverConfig,
};
use crate::synthetic::{sample_dataset, GraphKind, IndexDistribution, PathKind, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Settings that name files or directories. They are not part of the hashed
/// configuration.
const PATH_KEYS: [&str; 5] = ["config", "out", "data", "truth", "scenario"];

const DATA_KEYS: [&str; 5] = ["data", "z_column", "log_returns", "standardize", "rescale_z"];
const SMOOTHING_KEYS: [&str; 5] = ["grid_size", "bandwidth_multiplier", "bandwidth", "kernel", "centering"];
const SOLVER_KEYS: [&str; 7] = ["lambda", "lipschitz", "beta", "beta_schedule", "max_iter", "rel_tol", "support_tol"];
const SCENARIO_KEYS: [&str; 7] = ["scenario", "graph", "p", "path_kind", "pd_floor", "index_distribution", "n"];
const ADMM_KEYS: [&str; 3] = ["rho", "admm_tol", "admm_max_iter"];
const BOOL_KEYS: [&str; 4] = ["log_returns", "standardize", "rescale_z", "screening"];

fn help_for(key: &str) -> &'static str {
    match key {
        "config" => "flat key=value config file; flags override it",
        "seed" => "random seed (default 0)",
        "out" => "output directory (default condcov_out)",
        "data" => "input CSV with a header row",
        "z_column" => "name of the index column (default z)",
        "log_returns" => "replace each feature by log(x_t / x_{t-1})",
        "standardize" => "scale each feature to mean 0, variance 1",
        "rescale_z" => "map the index affinely onto [0,1] (default true)",
        "grid_size" => "number of equally spaced grid points on [0,1] (default 25)",
        "bandwidth_multiplier" => "c in h = c n^{-1/5} (or n^{-1/4} for bands) (default 1)",
        "bandwidth" => "explicit bandwidth h, overriding the multiplier",
        "kernel" => "epanechnikov | boxcar | tricube",
        "centering" => "per_observation | at_target | none",
        "lambda" => "group penalty, or auto",
        "lipschitz" => "smooth-part constant L_f (default 0.1)",
        "beta" => "Moreau smoothing parameter (default 0.1)",
        "beta_schedule" => "inverse_k | constant",
        "max_iter" => "iteration cap (default 2000)",
        "rel_tol" => "relative objective change to stop (default 1e-7)",
        "support_tol" => "group-norm threshold for the support (default 1e-4)",
        "solver" => "prisma | admm (default prisma)",
        "screening" => "split the problem into screened components (default true)",
        "rho" => "ADMM penalty parameter (default 1)",
        "admm_tol" => "ADMM residual tolerance (default 1e-6)",
        "admm_max_iter" => "ADMM iteration cap (default 10000)",
        "scenario" => "scenario file written by simulate",
        "graph" => "chain | nearest_neighbor | erdos_renyi | scale_free",
        "p" => "number of variables",
        "path_kind" => "random_walk | linear | sin | constant | two_regime",
        "pd_floor" => "smallest eigenvalue of the true precision (default 0.5)",
        "index_distribution" => "uniform | beta:a:b",
        "n" => "sample size",
        "truth" => "true edge list (u,v) for scoring a single data set",
        "lambda_count" => "number of penalties on the path (default 30)",
        "method" => "ccs | static_glasso",
        "replicates" => "independent data sets per setting",
        "alpha" => "one minus the nominal coverage",
        "rate_mode" => "undersmoothed | theorem",
        "folds" => "number of cross-validation folds (default 5)",
        "mode" => "ccs | static_glasso | both",
        "static_lambda" => "penalty for the static glasso, or auto",
        "kinds" => "comma-separated graph kinds",
        "p_list" => "comma-separated variable counts",
        "c_list" => "comma-separated sample-size constants",
        _ => "",
    }
}

fn subcommand(name: &'static str, about: &'static str, keys: Vec<&'static str>) -> Command {
    let mut cmd = Command::new(name).about(about);
    let mut all = vec!["config", "seed", "out"];
    all.extend(keys);
    all.dedup();
    for key in all {
        let mut arg = Arg::new(key).long(key.replace('_', "-")).help(help_for(key)).value_name("VALUE");
        if BOOL_KEYS.contains(&key) {
            arg = arg.num_args(0..=1).default_missing_value("true");
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn keys(groups: &[&[&'static str]], extra: &[&'static str]) -> Vec<&'static str> {
    let mut v: Vec<&'static str> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    v.extend_from_slice(extra);
    v
}

pub fn command() -> Command {
    Command::new("condcov")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Conditional covariance selection: index-varying sparse precision matrices")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(subcommand(
            "simulate",
            "draw a synthetic scenario and data set",
            keys(&[&SCENARIO_KEYS], &["grid_size"]),
        ))
        .subcommand(subcommand(
            "fit",
            "fit the precision field and its support",
            keys(&[&DATA_KEYS, &SMOOTHING_KEYS, &SOLVER_KEYS, &ADMM_KEYS], &["solver", "screening"]),
        ))
        .subcommand(subcommand(
            "path",
            "precision/recall along a penalty path",
            keys(
                &[&DATA_KEYS, &SMOOTHING_KEYS, &SOLVER_KEYS, &SCENARIO_KEYS],
                &["truth", "lambda_count", "method", "replicates"],
            ),
        ))
        .subcommand(subcommand(
            "ci",
            "pointwise confidence bands",
            keys(&[&DATA_KEYS, &SMOOTHING_KEYS, &SOLVER_KEYS], &["alpha", "rate_mode"]),
        ))
        .subcommand(subcommand(
            "cv",
            "cross-validated negative log-likelihood",
            keys(&[&DATA_KEYS, &SMOOTHING_KEYS, &SOLVER_KEYS], &["folds", "mode", "static_lambda"]),
        ))
        .subcommand(subcommand(
            "bench-solver",
            "PRISMA and ADMM objective traces on one problem",
            keys(&[&DATA_KEYS, &SMOOTHING_KEYS, &SOLVER_KEYS, &SCENARIO_KEYS, &ADMM_KEYS], &[]),
        ))
        .subcommand(subcommand(
            "coverage",
            "empirical coverage of the bands over replicates",
            keys(
                &[&SCENARIO_KEYS, &SMOOTHING_KEYS, &SOLVER_KEYS],
                &["replicates", "alpha", "rate_mode"],
            ),
        ))
        .subcommand(subcommand(
            "scaling",
            "mean Hamming distance against the rescaled sample size",
            keys(
                &[&SMOOTHING_KEYS, &SOLVER_KEYS],
                &["kinds", "p_list", "c_list", "path_kind", "replicates", "method"],
            ),
        ))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match dispatch(name, sub) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("error: solver did not converge; outputs were written with converged = false");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
                _ => EXIT_INPUT,
            }
        }
    }
}

/// Inputs common to every command.
struct Context {
    params: Params,
    paths: BTreeMap<String, PathBuf>,
    out: PathBuf,
    seed: u64,
}

impl Context {
    fn new(name: &str, sub: &ArgMatches) -> Result<Self> {
        let mut flags = BTreeMap::new();
        for id in sub.ids() {
            let id = id.as_str();
            if sub.value_source(id) == Some(ValueSource::CommandLine) {
                if let Some(v) = sub.get_one::<String>(id) {
                    flags.insert(id.to_string(), v.clone());
                }
            }
        }
        let file = match flags.get("config") {
            Some(path) => {
                parse_config_text(&fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read config {path}: {e}")))?)?
            }
            None => BTreeMap::new(),
        };
        let mut merged = file;
        merged.extend(flags);
        let mut paths = BTreeMap::new();
        for key in PATH_KEYS {
            if let Some(v) = merged.remove(key) {
                paths.insert(key.to_string(), PathBuf::from(v));
            }
        }
        let out = paths.get("out").cloned().unwrap_or_else(|| PathBuf::from("condcov_out"));
        let mut params = Params::new(name, merged, BTreeMap::new());
        let seed = params.get("seed", 0u64)?;
        Ok(Context { params, paths, out, seed })
    }

    fn path(&self, key: &str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    fn header(&self) -> String {
        io::header_line(self.seed, &self.params.hash())
    }

    fn write(&self, file: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out.join(file);
        io::write_file(&path, contents)?;
        Ok(path)
    }

    fn write_json(&self, file: &str, mut body: Value) -> Result<PathBuf> {
        if let Value::Object(map) = &mut body {
            map.insert("header".into(), Value::String(self.header()));
            map.insert("config".into(), json!(self.params.effective()));
            let inputs: BTreeMap<&str, String> = self
                .paths
                .iter()
                .filter(|(k, _)| k.as_str() != "out")
                .map(|(k, v)| (k.as_str(), v.display().to_string()))
                .collect();
            map.insert("inputs".into(), json!(inputs));
        }
        self.write(file, &(serde_json::to_string_pretty(&body)? + "\n"))
    }
}

fn dispatch(name: &str, sub: &ArgMatches) -> Result<bool> {
    let mut ctx = Context::new(name, sub)?;
    match name {
        "simulate" => cmd_simulate(&mut ctx),
        "fit" => cmd_fit(&mut ctx),
        "path" => cmd_path(&mut ctx),
        "ci" => cmd_ci(&mut ctx),
        "cv" => cmd_cv(&mut ctx),
        "bench-solver" => cmd_bench(&mut ctx),
        "coverage" => cmd_coverage(&mut ctx),
        "scaling" => cmd_scaling(&mut ctx),
        other => Err(Error::InvalidInput(format!("unknown command '{other}'"))),
    }
}

fn read_bool(params: &mut Params, key: &str, default: bool) -> Result<bool> {
    params.get(key, default)
}

fn load_data(ctx: &mut Context) -> Result<Ingested> {
    let path = ctx
        .path("data")
        .ok_or_else(|| Error::InvalidInput("missing --data".into()))?
        .to_path_buf();
    let options = IngestOptions {
        z_column: ctx.params.get("z_column", "z".to_string())?,
        log_returns: read_bool(&mut ctx.params, "log_returns", false)?,
        standardize: read_bool(&mut ctx.params, "standardize", false)?,
        rescale_z: read_bool(&mut ctx.params, "rescale_z", true)?,
    };
    ingest_csv(&path, &options)
}

struct Smoothing {
    grid: IndexGrid,
    multiplier: f64,
    explicit: Option<f64>,
    kernel: KernelKind,
    centering: Centering,
}

impl Smoothing {
    fn read(params: &mut Params) -> Result<Self> {
        let grid_size = params.get("grid_size", 25usize)?;
        let multiplier = params.get("bandwidth_multiplier", 1.0f64)?;
        if !(multiplier > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth_multiplier must be positive, got {multiplier}"
            )));
        }
        Ok(Smoothing {
            grid: IndexGrid::uniform(grid_size)?,
            multiplier,
            explicit: params.get_opt("bandwidth")?,
            kernel: params.get("kernel", KernelKind::default())?,
            centering: params.get("centering", Centering::default())?,
        })
    }

    fn bandwidth(&self, n: usize, regime: BandwidthRegime) -> Result<Bandwidth> {
        match self.explicit {
            Some(h) => Bandwidth::new(h),
            None => Bandwidth::for_sample_size(n, self.multiplier, regime),
        }
    }

    fn covariance(&self, sample: &IndexedSample, regime: BandwidthRegime) -> Result<CovarianceField> {
        let h = self.bandwidth(sample.n(), regime)?;
        local_covariance_field(sample, &self.grid, h, self.kernel, self.centering)
    }
}

/// Solver settings; `lambda` stays unresolved (`None` means auto).
fn read_solver(params: &mut Params) -> Result<(SolverConfig, Option<f64>)> {
    let d = SolverConfig::default();
    let lambda = params.get_opt::<f64>("lambda")?;
    let config = SolverConfig {
        lambda: 0.0,
        lipschitz: params.get("lipschitz", d.lipschitz)?,
        beta: params.get("beta", d.beta)?,
        beta_schedule: params.get("beta_schedule", BetaSchedule::default())?,
        max_iter: params.get("max_iter", d.max_iter)?,
        rel_tol: params.get("rel_tol", d.rel_tol)?,
        support_tol: params.get("support_tol", d.support_tol)?,
    };
    if let Some(l) = lambda {
        SolverConfig {
            lambda: l,
            ..config.clone()
        }
        .validate()?;
    }
    config.validate()?;
    Ok((config, lambda))
}

fn read_admm(params: &mut Params, lambda: f64) -> Result<AdmmConfig> {
    let d = AdmmConfig::default();
    let c = AdmmConfig {
        lambda,
        rho: params.get("rho", d.rho)?,
        max_iter: params.get("admm_max_iter", d.max_iter)?,
        tol: params.get("admm_tol", d.tol)?,
    };
    c.validate()?;
    Ok(c)
}

fn load_scenario(ctx: &mut Context, default_p: usize) -> Result<ScenarioSpec> {
    if let Some(path) = ctx.path("scenario") {
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read scenario {}: {e}", path.display())))?;
        return ScenarioSpec::from_text(&text);
    }
    let kind = ctx.params.get("graph", GraphKind::Chain)?;
    let p = ctx.params.get("p", default_p)?;
    let path_kind = ctx.params.get("path_kind", PathKind::Sin)?;
    let mut spec = ScenarioSpec::generate(kind, p, path_kind, ctx.seed)?;
    spec.pd_floor = ctx.params.get("pd_floor", spec.pd_floor)?;
    if !(spec.pd_floor > 0.0) {
        return Err(Error::InvalidInput(format!("pd_floor must be positive, got {}", spec.pd_floor)));
    }
    spec.index_distribution = ctx.params.get("index_distribution", IndexDistribution::Uniform)?;
    Ok(spec)
}

fn read_n(params: &mut Params, default: usize) -> Result<usize> {
    let n = params.get("n", default)?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
    }
    Ok(n)
}

fn finish(ctx: &Context) -> Result<()> {
    ctx.params.check_unused()
}

fn cmd_simulate(ctx: &mut Context) -> Result<bool> {
    let scenario = load_scenario(ctx, 20)?;
    let n = read_n(&mut ctx.params, 500)?;
    let grid = IndexGrid::uniform(ctx.params.get("grid_size", 25usize)?)?;
    finish(ctx)?;
    // sampling draws from the next seed so it does not replay the scenario stream
    let data = sample_dataset(&scenario, n, &grid, ctx.seed.wrapping_add(1))?;
    let header = ctx.header();
    ctx.write("scenario.txt", &format!("{header}\n{}", scenario.to_text()))?;
    ctx.write("data.csv", &io::sample_csv(&header, &data.sample))?;
    ctx.write("truth_grid.csv", &io::omega_grid_csv(&header, &grid, &data.truth))?;
    ctx.write("truth_edges.csv", &io::edges_csv(&header, scenario.support()))?;
    println!(
        "simulate: n={n} p={} edges={} -> {}",
        scenario.p(),
        scenario.support().len(),
        ctx.out.display()
    );
    Ok(true)
}

fn report_json(report: &SolveReport) -> Value {
    json!({
        "iterations": report.iterations,
        "converged": report.converged,
        "final_objective": report.final_objective,
        "objective_trace": report.objective_trace,
    })
}

fn cmd_fit(ctx: &mut Context) -> Result<bool> {
    let data = load_data(ctx)?;
    let smoothing = Smoothing::read(&mut ctx.params)?;
    let (solver, lambda) = read_solver(&mut ctx.params)?;
    let solver_kind = ctx.params.get("solver", "prisma".to_string())?;
    let screening = read_bool(&mut ctx.params, "screening", true)?;
    let sample = &data.sample;
    let lambda = lambda.unwrap_or_else(|| simulation_lambda(sample.n(), sample.p(), smoothing.grid.len()));
    let admm = if solver_kind == "admm" {
        Some(read_admm(&mut ctx.params, lambda)?)
    } else {
        None
    };
    if solver_kind != "prisma" && solver_kind != "admm" {
        return Err(Error::InvalidInput(format!("unknown solver '{solver_kind}'")));
    }
    finish(ctx)?;

    let cov = smoothing.covariance(sample, BandwidthRegime::Estimation)?;
    let config = SolverConfig { lambda, ..solver };
    let (field, report) = match &admm {
        Some(a) => fit_admm(&cov, a)?,
        None if screening => fit_prisma_screened(&cov, &config)?,
        None => fit_prisma(&cov, &config)?,
    };
    let components = if lambda > 0.0 { screen_components(&cov, lambda)?.len() } else { 1 };
    let header = ctx.header();
    ctx.write("omega_grid.csv", &io::omega_grid_csv(&header, &field.grid, &field.matrices))?;
    ctx.write("support.csv", &io::support_csv(&header, &field.support, &field.group_norms))?;
    ctx.write_json(
        "report.json",
        json!({
            "command": "fit",
            "n": sample.n(),
            "p": sample.p(),
            "rows_read": data.rows_read,
            "features": data.feature_names,
            "grid_size": field.grid.len(),
            "bandwidth": cov.bandwidth.value(),
            "lambda": lambda,
            "lambda_max": lambda_max(&cov),
            "components": components,
            "support_size": field.support.len(),
            "solver": report_json(&report),
        }),
    )?;
    println!(
        "fit: n={} p={} lambda={lambda} edges={} iterations={} converged={}",
        sample.n(),
        sample.p(),
        field.support.len(),
        report.iterations,
        report.converged
    );
    Ok(report.converged)
}

fn pr_curve_csv(header: &str, rows: &[PrRow]) -> String {
    let mut s = format!("{header}\nlambda,precision,recall,f1,hamming\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.lambda, r.precision, r.recall, r.f1, r.hamming);
    }
    s
}

fn cmd_path(ctx: &mut Context) -> Result<bool> {
    let count = ctx.params.get("lambda_count", 30usize)?;
    let rows = if ctx.path("data").is_some() {
        let data = load_data(ctx)?;
        let truth_path = ctx
            .path("truth")
            .ok_or_else(|| Error::InvalidInput("path on a data file needs --truth".into()))?
            .to_path_buf();
        let smoothing = Smoothing::read(&mut ctx.params)?;
        let (solver, lambda) = read_solver(&mut ctx.params)?;
        if lambda.is_some() {
            return Err(Error::InvalidInput("path builds its own penalties; drop 'lambda'".into()));
        }
        finish(ctx)?;
        let truth = read_edges(&fs::read_to_string(&truth_path)?, data.sample.p())?;
        let cov = smoothing.covariance(&data.sample, BandwidthRegime::Estimation)?;
        let mut rows = Vec::with_capacity(count);
        for lambda in lambda_grid(&cov, count)? {
            let (field, report) = fit_prisma_screened(&cov, &SolverConfig { lambda, ..solver.clone() })?;
            let m = recovery_metrics(&field.support, &truth);
            rows.push(PrRow {
                lambda,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                hamming: m.hamming as f64,
                failures: 0,
                unconverged: usize::from(!report.converged),
            });
        }
        rows
    } else {
        let scenario = load_scenario(ctx, 20)?;
        let n = read_n(&mut ctx.params, 500)?;
        let smoothing = Smoothing::read(&mut ctx.params)?;
        let (solver, lambda) = read_solver(&mut ctx.params)?;
        if lambda.is_some() {
            return Err(Error::InvalidInput("path builds its own penalties; drop 'lambda'".into()));
        }
        let method = match ctx.params.get("method", "ccs".to_string())?.as_str() {
            "ccs" => FitMethod::Ccs,
            "static_glasso" => FitMethod::StaticGlasso,
            other => return Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        };
        let replicates = ctx.params.get("replicates", 5usize)?;
        if smoothing.explicit.is_some() {
            return Err(Error::InvalidInput(
                "path over replicates takes bandwidth_multiplier, not bandwidth".into(),
            ));
        }
        finish(ctx)?;
        let config = RecoveryConfig {
            method,
            grid_size: smoothing.grid.len(),
            bandwidth_multiplier: smoothing.multiplier,
            kernel: smoothing.kernel,
            centering: smoothing.centering,
            solver,
            replicates,
            seed: ctx.seed.wrapping_add(1),
        };
        let path = default_lambda_path(&scenario, n, &config, count)?;
        run_recovery_experiment(&scenario, n, &path, &config)?.rows
    };
    ctx.write("pr_curve.csv", &pr_curve_csv(&ctx.header(), &rows))?;
    let best = rows.iter().filter(|r| !r.f1.is_nan()).map(|r| r.f1).fold(0.0, f64::max);
    println!("path: {} penalties, best f1 {best}", rows.len());
    Ok(true)
}

fn cmd_ci(ctx: &mut Context) -> Result<bool> {
    let data = load_data(ctx)?;
    let smoothing = Smoothing::read(&mut ctx.params)?;
    let (solver, lambda) = read_solver(&mut ctx.params)?;
    let alpha = ctx.params.get("alpha", 0.05f64)?;
    let rate_mode = ctx.params.get("rate_mode", RateMode::default())?;
    finish(ctx)?;
    let sample = &data.sample;
    let lambda = lambda.unwrap_or_else(|| simulation_lambda(sample.n(), sample.p(), smoothing.grid.len()));
    let h = smoothing.bandwidth(sample.n(), rate_mode.bandwidth_regime())?;
    let cov = local_covariance_field(sample, &smoothing.grid, h, smoothing.kernel, smoothing.centering)?;
    let (field, report) = fit_prisma_screened(&cov, &SolverConfig { lambda, ..solver })?;
    let band = confidence_band(&field, &cov, sample, alpha, rate_mode, smoothing.kernel, h)?;
    ctx.write("ci.csv", &io::ci_csv(&ctx.header(), &band))?;
    println!(
        "ci: n={} p={} alpha={alpha} rate_mode={rate_mode} converged={}",
        sample.n(),
        sample.p(),
        report.converged
    );
    Ok(report.converged)
}

fn cmd_cv(ctx: &mut Context) -> Result<bool> {
    let data = load_data(ctx)?;
    let smoothing = Smoothing::read(&mut ctx.params)?;
    let (solver, lambda) = read_solver(&mut ctx.params)?;
    let folds = ctx.params.get("folds", 5usize)?;
    let mode = ctx.params.get("mode", "both".to_string())?;
    let modes: Vec<CvMode> = match mode.as_str() {
        "ccs" => vec![CvMode::Ccs],
        "static_glasso" => vec![CvMode::StaticGlasso],
        "both" => vec![CvMode::Ccs, CvMode::StaticGlasso],
        other => return Err(Error::InvalidInput(format!("unknown cv mode '{other}'"))),
    };
    let static_lambda = if modes.contains(&CvMode::StaticGlasso) {
        ctx.params.get_opt::<f64>("static_lambda")?
    } else {
        None
    };
    if smoothing.explicit.is_some() {
        return Err(Error::InvalidInput(
            "cv refits on each split; use bandwidth_multiplier, not bandwidth".into(),
        ));
    }
    finish(ctx)?;
    let sample = &data.sample;
    let (n, p) = (sample.n(), sample.p());
    let config = CvFitConfig {
        grid_size: smoothing.grid.len(),
        bandwidth_multiplier: smoothing.multiplier,
        kernel: smoothing.kernel,
        centering: smoothing.centering,
        solver,
    };
    let mut results = serde_json::Map::new();
    for mode in modes {
        let (key, lam) = match mode {
            CvMode::Ccs => ("ccs", lambda.unwrap_or_else(|| simulation_lambda(n, p, config.grid_size))),
            CvMode::StaticGlasso => ("static_glasso", static_lambda.unwrap_or_else(|| simulation_lambda(n, p, 1))),
        };
        let r = cv_loss(sample, folds, lam, &config, mode, ctx.seed)?;
        println!("cv {key}: lambda={lam} total={} se={}", r.total, r.std_error);
        results.insert(
            key.into(),
            json!({ "lambda": lam, "total": r.total, "std_error": r.std_error, "per_fold": r.per_fold }),
        );
    }
    ctx.write_json(
        "cv.json",
        json!({ "command": "cv", "n": n, "p": p, "folds": folds, "results": results }),
    )?;
    Ok(true)
}

fn cmd_bench(ctx: &mut Context) -> Result<bool> {
    let sample = if ctx.path("data").is_some() {
        load_data(ctx)?.sample
    } else {
        let scenario = load_scenario(ctx, 50)?;
        let n = read_n(&mut ctx.params, 500)?;
        let grid = IndexGrid::uniform(2)?;
        sample_dataset(&scenario, n, &grid, ctx.seed.wrapping_add(1))?.sample
    };
    let smoothing = Smoothing::read(&mut ctx.params)?;
    let (solver, lambda) = read_solver(&mut ctx.params)?;
    let lambda = lambda.unwrap_or_else(|| simulation_lambda(sample.n(), sample.p(), smoothing.grid.len()));
    let admm = read_admm(&mut ctx.params, lambda)?;
    finish(ctx)?;
    let cov = smoothing.covariance(&sample, BandwidthRegime::Estimation)?;
    let (pf, pr) = fit_prisma(&cov, &SolverConfig { lambda, ..solver })?;
    let (af, ar) = fit_admm(&cov, &admm)?;
    let mut s = format!("{}\nsolver,iteration,objective,seconds\n", ctx.header());
    for (name, rep) in [("prisma", &pr), ("admm", &ar)] {
        for (i, (obj, sec)) in rep.objective_trace.iter().zip(&rep.seconds_trace).enumerate() {
            let _ = writeln!(s, "{name},{i},{obj},{sec}");
        }
    }
    ctx.write("traces.csv", &s)?;
    let po = ccs_objective(&pf.matrices, &cov, lambda)?;
    let ao = ccs_objective(&af.matrices, &cov, lambda)?;
    println!(
        "bench-solver: n={} p={} lambda={lambda} prisma={po} ({} it) admm={ao} ({} it) relative gap={}",
        sample.n(),
        sample.p(),
        pr.iterations,
        ar.iterations,
        (po - ao).abs() / ao.abs().max(f64::MIN_POSITIVE)
    );
    Ok(pr.converged && ar.converged)
}

fn cmd_coverage(ctx: &mut Context) -> Result<bool> {
    let scenario = load_scenario(ctx, 20)?;
    let n = read_n(&mut ctx.params, 500)?;
    let smoothing = Smoothing::read(&mut ctx.params)?;
    let (solver, lambda) = read_solver(&mut ctx.params)?;
    let d = CoverageConfig::default();
    let replicates = ctx.params.get("replicates", d.replicates)?;
    let alpha = ctx.params.get("alpha", d.alpha)?;
    let rate_mode = ctx.params.get("rate_mode", d.rate_mode)?;
    if smoothing.explicit.is_some() {
        return Err(Error::InvalidInput("coverage takes bandwidth_multiplier, not bandwidth".into()));
    }
    finish(ctx)?;
    let config = CoverageConfig {
        grid_size: smoothing.grid.len(),
        replicates,
        alpha,
        rate_mode,
        bandwidth_multiplier: smoothing.multiplier,
        kernel: smoothing.kernel,
        centering: smoothing.centering,
        solver,
        lambda,
        seed: ctx.seed.wrapping_add(1),
    };
    let summary = run_coverage_experiment(&scenario, n, &config)?;
    let p = scenario.p();
    let pairs: Vec<Value> = (0..p)
        .flat_map(|u| ((u + 1)..p).map(move |v| (u, v)))
        .map(|(u, v)| {
            json!({
                "u": u, "v": v,
                "in_support": scenario.support().contains(u, v),
                "coverage": summary.per_pair[(u, v)],
                "length": summary.per_pair_length[(u, v)],
            })
        })
        .collect();
    ctx.write_json(
        "coverage.json",
        json!({
            "command": "coverage",
            "n": n,
            "p": p,
            "lambda": lambda.unwrap_or_else(|| simulation_lambda(n, p, config.grid_size)),
            "summary": summary,
            "pairs": pairs,
        }),
    )?;
    println!(
        "coverage: support {:?} complement {:?} length support {:?} complement {:?}",
        summary.avgcov_support, summary.avgcov_complement, summary.avglength_support, summary.avglength_complement
    );
    Ok(true)
}

fn cmd_scaling(ctx: &mut Context) -> Result<bool> {
    let kinds = ctx.params.get_list("kinds", &[GraphKind::Chain])?;
    let p_list = ctx.params.get_list("p_list", &[10usize, 20, 40])?;
    let c_list = ctx.params.get_list("c_list", &[2.0f64, 4.0, 8.0, 16.0])?;
    let path_kind = ctx.params.get("path_kind", PathKind::Sin)?;
    let replicates = ctx.params.get("replicates", 5usize)?;
    let smoothing = Smoothing::read(&mut ctx.params)?;
    let (solver, lambda) = read_solver(&mut ctx.params)?;
    if lambda.is_some() {
        return Err(Error::InvalidInput("scaling sets lambda from n; drop 'lambda'".into()));
    }
    if smoothing.explicit.is_some() {
        return Err(Error::InvalidInput("scaling takes bandwidth_multiplier, not bandwidth".into()));
    }
    finish(ctx)?;
    let config = ScalingConfig {
        path_kind,
        recovery: RecoveryConfig {
            method: FitMethod::Ccs,
            grid_size: smoothing.grid.len(),
            bandwidth_multiplier: smoothing.multiplier,
            kernel: smoothing.kernel,
            centering: smoothing.centering,
            solver,
            replicates,
            seed: ctx.seed,
        },
    };
    let rows = run_scaling_experiment(&kinds, &p_list, &c_list, &config)?;
    let mut s = format!("{}\nkind,p,c,max_degree,n,lambda,mean_hamming\n", ctx.header());
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.kind, r.p, r.c, r.max_degree, r.n, r.lambda, r.mean_hamming
        );
    }
    ctx.write("hamming.csv", &s)?;
    println!("scaling: {} rows", rows.len());
    Ok(true)
}

/// Reads a fitted field back from an `omega_grid.csv` file.
pub fn load_omega_grid(path: &Path, support_tol: f64) -> Result<PrecisionField> {
    read_omega_grid(&fs::read_to_string(path)?, support_tol)
}
