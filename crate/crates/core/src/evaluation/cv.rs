use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{Bandwidth, BandwidthRegime, KernelKind};
use crate::linalg::log_det_pd;
use crate::local_moments::{local_covariance_field, Centering, IndexGrid, IndexedSample};
use crate::solvers::{fit_glasso_static, fit_prisma_screened, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    /// Index-varying fit, evaluated at the nearest grid point.
    Ccs,
    /// One graphical lasso fit on the pooled training covariance.
    StaticGlasso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvFitConfig {
    pub grid_size: usize,
    pub bandwidth_multiplier: f64,
    pub kernel: KernelKind,
    pub centering: Centering,
    pub solver: SolverConfig,
}

impl Default for CvFitConfig {
    fn default() -> Self {
        CvFitConfig {
            grid_size: 25,
            bandwidth_multiplier: 1.0,
            kernel: KernelKind::default(),
            centering: Centering::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub total: f64,
    pub per_fold: Vec<f64>,
    /// `√K · sd(per_fold)`, the standard error of the total.
    pub std_error: f64,
}

/// `−log det Ω + xᵀ Ω x` for one held-out observation.
pub fn point_loss(omega: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    let log_det = log_det_pd(omega).ok_or(Error::NotPositiveDefinite {
        index: 0,
        min_eigenvalue: f64::NAN,
    })?;
    Ok(-log_det + (x.transpose() * omega * x)[(0, 0)])
}

/// Seeded shuffle followed by contiguous blocks; earlier folds take the
/// remainder.
fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut block = order[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    out
}

/// K-fold held-out negative log-likelihood summed over all observations.
pub fn cv_loss(sample: &IndexedSample, folds: usize, lambda: f64, config: &CvFitConfig, mode: CvMode, seed: u64) -> Result<CvResult> {
    let n = sample.n();
    if folds < 2 || folds > n {
        return Err(Error::InvalidInput(format!("need 2 <= folds <= n = {n}, got {folds}")));
    }
    let blocks = fold_assignment(n, folds, seed);
    let mut per_fold = Vec::with_capacity(folds);
    for (f, test) in blocks.iter().enumerate() {
        let wrap = |e: Error| Error::Fold {
            fold: f,
            source: Box::new(e),
        };
        let train: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
        let train_sample = sample.select(&train).map_err(wrap)?;
        let test_sample = sample.select(test).map_err(wrap)?;
        let loss = fold_loss(&train_sample, &test_sample, lambda, config, mode).map_err(wrap)?;
        per_fold.push(loss);
    }
    let total: f64 = per_fold.iter().sum();
    let mean = total / folds as f64;
    let var = per_fold.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (folds - 1) as f64;
    Ok(CvResult {
        total,
        per_fold,
        std_error: (folds as f64 * var).sqrt(),
    })
}

fn fold_loss(train: &IndexedSample, test: &IndexedSample, lambda: f64, config: &CvFitConfig, mode: CvMode) -> Result<f64> {
    let solver = SolverConfig {
        lambda,
        ..config.solver.clone()
    };
    let rows = |i: usize| test.x().row(i).transpose();
    match mode {
        CvMode::StaticGlasso => {
            let (omega, report) = fit_glasso_static(train, lambda, &solver)?;
            report.ensure_converged()?;
            (0..test.n()).map(|i| point_loss(&omega, &rows(i))).sum()
        }
        CvMode::Ccs => {
            let grid = IndexGrid::uniform(config.grid_size)?;
            let h = Bandwidth::for_sample_size(train.n(), config.bandwidth_multiplier, BandwidthRegime::Estimation)?;
            let cov = local_covariance_field(train, &grid, h, config.kernel, config.centering)?;
            let (field, report) = fit_prisma_screened(&cov, &solver)?;
            report.ensure_converged()?;
            (0..test.n())
                .map(|i| point_loss(&field.matrices[grid.nearest(test.z()[i])], &rows(i)))
                .sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_loss_examples() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(point_loss(&eye, &DVector::zeros(3)).unwrap(), 0.0);
        let om = DMatrix::from_element(1, 1, 2.5);
        let x = DVector::from_element(1, 0.4);
        assert!((point_loss(&om, &x).unwrap() - (-(2.5f64.ln()) + 2.5 * 0.16)).abs() < 1e-15);
    }

    #[test]
    fn folds_partition_indices() {
        let blocks = fold_assignment(23, 5, 3);
        assert_eq!(blocks.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = blocks.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(blocks, fold_assignment(23, 5, 3));
        assert_ne!(blocks, fold_assignment(23, 5, 4));
    }

    #[test]
    fn rejects_bad_fold_counts() {
        let s = IndexedSample::new(vec![0.1, 0.5, 0.9], DMatrix::from_element(3, 2, 1.0)).unwrap();
        let c = CvFitConfig::default();
        assert!(cv_loss(&s, 1, 0.1, &c, CvMode::StaticGlasso, 0).is_err());
        assert!(cv_loss(&s, 4, 0.1, &c, CvMode::StaticGlasso, 0).is_err());
    }
}
