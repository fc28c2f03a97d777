use nalgebra::DMatrix;
use serde::Serialize;

use super::recovery_metrics;
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::inference::{confidence_band, coverage_tally, CoverageSummary, RateMode};
use crate::kernels::{Bandwidth, BandwidthRegime, KernelKind};
use crate::local_moments::{local_covariance_field, Centering, CovarianceField, IndexGrid, IndexedSample};
use crate::solvers::{fit_glasso_static, fit_prisma_screened, lambda_grid, SolverConfig};
use crate::synthetic::{sample_dataset, GraphKind, PathKind, ScenarioSpec};

/// `√K · n^{-3/8} √log p`: the simulation penalty for an averaged objective,
/// rescaled to the raw sum over `K` grid points.
pub fn simulation_lambda(n: usize, p: usize, grid_size: usize) -> f64 {
    (grid_size as f64).sqrt() * (n as f64).powf(-3.0 / 8.0) * (p as f64).ln().sqrt()
}

/// `⌈C d^{5/2} (log p)^{5/4}⌉`
pub fn scaling_sample_size(c: f64, max_degree: usize, p: usize) -> usize {
    (c * (max_degree as f64).powf(2.5) * (p as f64).ln().powf(1.25)).ceil() as usize
}

/// Off-diagonal pairs with `|m_uv| > tol` (upper triangle).
pub fn matrix_support(m: &DMatrix<f64>, tol: f64) -> EdgeSet {
    let p = m.nrows();
    let mut s = EdgeSet::new(p);
    for u in 0..p {
        for v in (u + 1)..p {
            if m[(u, v)].abs() > tol {
                s.insert(u, v).expect("indices in range");
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ccs,
    StaticGlasso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub method: FitMethod,
    pub grid_size: usize,
    pub bandwidth_multiplier: f64,
    pub kernel: KernelKind,
    pub centering: Centering,
    pub solver: SolverConfig,
    pub replicates: usize,
    /// Replicate `r` samples with seed `seed + r`.
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            method: FitMethod::Ccs,
            grid_size: 25,
            bandwidth_multiplier: 1.0,
            kernel: KernelKind::default(),
            centering: Centering::default(),
            solver: SolverConfig::default(),
            replicates: 10,
            seed: 0,
        }
    }
}

/// Replicate-averaged metrics at one penalty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrRow {
    pub lambda: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hamming: f64,
    /// Replicates whose fit failed and were left out of the averages.
    pub failures: usize,
    /// Replicates that hit `max_iter`; their estimates are still used.
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryTable {
    pub rows: Vec<PrRow>,
    /// Row with the largest mean F1 (first one on ties).
    pub best: Option<PrRow>,
}

fn replicate_sample(scenario: &ScenarioSpec, n: usize, grid: &IndexGrid, seed: u64) -> Result<IndexedSample> {
    Ok(sample_dataset(scenario, n, grid, seed)?.sample)
}

fn covariance_for(sample: &IndexedSample, grid: &IndexGrid, config: &RecoveryConfig) -> Result<CovarianceField> {
    let h = Bandwidth::for_sample_size(sample.n(), config.bandwidth_multiplier, BandwidthRegime::Estimation)?;
    local_covariance_field(sample, grid, h, config.kernel, config.centering)
}

fn log_path(top: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(top > 0.0) {
        return Err(Error::InvalidInput(format!("cannot build a path of {count} values below {top}")));
    }
    let (hi, lo) = (top.ln(), (top / 100.0).ln());
    Ok((0..count).map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp()).collect())
}

/// Penalty path from a pilot replicate (the one sampled with `config.seed`),
/// scaled to the chosen method.
pub fn default_lambda_path(scenario: &ScenarioSpec, n: usize, config: &RecoveryConfig, count: usize) -> Result<Vec<f64>> {
    let grid = IndexGrid::uniform(config.grid_size)?;
    let sample = replicate_sample(scenario, n, &grid, config.seed)?;
    match config.method {
        FitMethod::Ccs => lambda_grid(&covariance_for(&sample, &grid, config)?, count),
        FitMethod::StaticGlasso => {
            let s = sample.pooled_covariance();
            let top = (0..s.nrows())
                .flat_map(|u| (0..s.ncols()).filter(move |&v| v != u).map(move |v| (u, v)))
                .map(|e| s[e].abs())
                .fold(0.0, f64::max);
            log_path(top, count)
        }
    }
}

/// Fits every penalty on every replicate and averages the recovery metrics.
/// Fit errors are counted per penalty rather than aborting the run.
pub fn run_recovery_experiment(scenario: &ScenarioSpec, n: usize, lambdas: &[f64], config: &RecoveryConfig) -> Result<RecoveryTable> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty penalty path".into()));
    }
    if config.replicates == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let grid = IndexGrid::uniform(config.grid_size)?;
    let truth = scenario.support();
    // sums of precision, recall, f1, hamming; failures; unconverged
    let mut acc = vec![([0.0f64; 4], 0usize, 0usize); lambdas.len()];
    for r in 0..config.replicates {
        let sample = replicate_sample(scenario, n, &grid, config.seed.wrapping_add(r as u64))?;
        let cov = match config.method {
            FitMethod::Ccs => Some(covariance_for(&sample, &grid, config)?),
            FitMethod::StaticGlasso => None,
        };
        for (slot, &lambda) in acc.iter_mut().zip(lambdas) {
            let solver = SolverConfig {
                lambda,
                ..config.solver.clone()
            };
            let fitted = match &cov {
                Some(cov) => fit_prisma_screened(cov, &solver).map(|(f, rep)| (f.support, rep.converged)),
                None => fit_glasso_static(&sample, lambda, &solver).map(|(m, rep)| (matrix_support(&m, solver.support_tol), rep.converged)),
            };
            match fitted {
                Ok((support, converged)) => {
                    let m = recovery_metrics(&support, truth);
                    for (s, v) in slot.0.iter_mut().zip([m.precision, m.recall, m.f1, m.hamming as f64]) {
                        *s += v;
                    }
                    slot.2 += usize::from(!converged);
                }
                Err(_) => slot.1 += 1,
            }
        }
    }
    let rows: Vec<PrRow> = acc
        .into_iter()
        .zip(lambdas)
        .map(|((sums, failures, unconverged), &lambda)| {
            let ok = (config.replicates - failures) as f64;
            let mean = |s: f64| if ok > 0.0 { s / ok } else { f64::NAN };
            PrRow {
                lambda,
                precision: mean(sums[0]),
                recall: mean(sums[1]),
                f1: mean(sums[2]),
                hamming: mean(sums[3]),
                failures,
                unconverged,
            }
        })
        .collect();
    let best = rows.iter().filter(|r| !r.f1.is_nan()).fold(None::<&PrRow>, |b, r| match b {
        Some(b) if b.f1 >= r.f1 => Some(b),
        _ => Some(r),
    });
    Ok(RecoveryTable { best: best.cloned(), rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub path_kind: PathKind,
    pub recovery: RecoveryConfig,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            path_kind: PathKind::Sin,
            recovery: RecoveryConfig {
                replicates: 5,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub kind: GraphKind,
    pub p: usize,
    pub c: f64,
    pub max_degree: usize,
    pub n: usize,
    pub lambda: f64,
    pub mean_hamming: f64,
    pub failures: usize,
}

/// Mean Hamming distance at `n = ⌈C d^{5/2} (log p)^{5/4}⌉` and the
/// simulation penalty, one row per `(kind, p, C)`. The graph for each
/// `(kind, p)` is drawn once from `config.recovery.seed`.
pub fn run_scaling_experiment(kinds: &[GraphKind], p_list: &[usize], c_list: &[f64], config: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::with_capacity(kinds.len() * p_list.len() * c_list.len());
    for &kind in kinds {
        for &p in p_list {
            let scenario = ScenarioSpec::generate(kind, p, config.path_kind, config.recovery.seed)?;
            let d = scenario.graph.max_degree.max(1);
            for &c in c_list {
                if !(c > 0.0) {
                    return Err(Error::InvalidInput(format!("scaling constant must be positive, got {c}")));
                }
                let n = scaling_sample_size(c, d, p).max(2);
                let lambda = simulation_lambda(n, p, config.recovery.grid_size);
                let table = run_recovery_experiment(&scenario, n, &[lambda], &config.recovery)?;
                let row = &table.rows[0];
                rows.push(ScalingRow {
                    kind,
                    p,
                    c,
                    max_degree: d,
                    n,
                    lambda,
                    mean_hamming: row.hamming,
                    failures: row.failures,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub grid_size: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub rate_mode: RateMode,
    pub bandwidth_multiplier: f64,
    pub kernel: KernelKind,
    pub centering: Centering,
    pub solver: SolverConfig,
    /// Defaults to the simulation penalty.
    pub lambda: Option<f64>,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            grid_size: 25,
            replicates: 100,
            alpha: 0.025,
            rate_mode: RateMode::default(),
            bandwidth_multiplier: 1.0,
            kernel: KernelKind::default(),
            centering: Centering::default(),
            solver: SolverConfig::default(),
            lambda: None,
            seed: 0,
        }
    }
}

/// Coverage of the true precision values by the debiased bands over
/// independent replicates.
pub fn run_coverage_experiment(scenario: &ScenarioSpec, n: usize, config: &CoverageConfig) -> Result<CoverageSummary> {
    if config.replicates == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let grid = IndexGrid::uniform(config.grid_size)?;
    let lambda = config
        .lambda
        .unwrap_or_else(|| simulation_lambda(n, scenario.p(), config.grid_size));
    let solver = SolverConfig {
        lambda,
        ..config.solver.clone()
    };
    let h = Bandwidth::for_sample_size(n, config.bandwidth_multiplier, config.rate_mode.bandwidth_regime())?;
    let truth = scenario.precision_on_grid(&grid);
    let mut bands = Vec::with_capacity(config.replicates);
    for r in 0..config.replicates {
        let sample = replicate_sample(scenario, n, &grid, config.seed.wrapping_add(r as u64))?;
        let cov = local_covariance_field(&sample, &grid, h, config.kernel, config.centering)?;
        let (field, report) = fit_prisma_screened(&cov, &solver)?;
        report.ensure_converged()?;
        bands.push(confidence_band(
            &field,
            &cov,
            &sample,
            config.alpha,
            config.rate_mode,
            config.kernel,
            h,
        )?);
    }
    coverage_tally(&truth, scenario.support(), &bands)
}
