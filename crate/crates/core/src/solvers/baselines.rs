//! Single-matrix graphical lasso baselines: one that ignores the index and one
//! fitted at a single index point from the kernel-smoothed covariance.

use nalgebra::DMatrix;

use super::admm::{admm_solve, AdmmConfig};
use super::prisma::prisma_solve;
use super::{Penalty, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::kernels::{Bandwidth, KernelKind};
use crate::local_moments::{local_covariance_field, Centering, IndexGrid, IndexedSample};

/// Graphical lasso on the pooled sample covariance (the index is ignored).
pub fn fit_glasso_static(sample: &IndexedSample, lambda: f64, config: &SolverConfig) -> Result<(DMatrix<f64>, SolveReport)> {
    if sample.n() < 2 {
        return Err(Error::InvalidInput("pooled covariance needs n >= 2".into()));
    }
    glasso_on(sample.pooled_covariance(), lambda, config)
}

/// Graphical lasso on `Σ̂(τ)` at a single index point.
pub fn fit_pointwise_lasso(
    sample: &IndexedSample,
    tau: f64,
    h: Bandwidth,
    kind: KernelKind,
    centering: Centering,
    lambda: f64,
    config: &SolverConfig,
) -> Result<(DMatrix<f64>, SolveReport)> {
    let grid = IndexGrid::single(tau)?;
    let cov = local_covariance_field(sample, &grid, h, kind, centering)?;
    glasso_on(cov.matrices.into_iter().next().expect("one grid point"), lambda, config)
}

/// `tr(ΣΩ) - log det Ω + λ Σ_{u≠v} |Ω_uv|` on a single matrix.
pub fn glasso_on(sigma: DMatrix<f64>, lambda: f64, config: &SolverConfig) -> Result<(DMatrix<f64>, SolveReport)> {
    let config = SolverConfig { lambda, ..config.clone() };
    let (mut theta, report) = prisma_solve(std::slice::from_ref(&sigma), &config, Penalty::Elementwise)?;
    Ok((theta.pop().expect("one matrix"), report))
}

/// Graphical lasso on one covariance matrix solved by ADMM; returns the
/// positive definite block.
pub fn glasso_admm(sigma: DMatrix<f64>, config: &AdmmConfig) -> Result<(DMatrix<f64>, SolveReport)> {
    let (mut omega, _, report) = admm_solve(std::slice::from_ref(&sigma), config, Penalty::Elementwise)?;
    Ok((omega.pop().expect("one matrix"), report))
}
