//! De-sparsified precision estimates and pointwise normal confidence bands.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::kernels::{density_estimate, Bandwidth, BandwidthRegime, KernelKind};
use crate::linalg::{check_square, symmetrize_in_place};
use crate::local_moments::{CovarianceField, IndexGrid, IndexedSample};
use crate::solvers::PrecisionField;

/// `2Ω − ΩΣΩ`: one Newton step of `Σ ↦ Σ⁻¹` from `Ω`, which removes the
/// first-order shrinkage bias of a penalized estimate.
pub fn debias(omega: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = check_square(omega, "precision estimate")?;
    let q = check_square(sigma, "covariance estimate")?;
    if p != q {
        return Err(Error::DimensionMismatch(format!("precision is {p}x{p}, covariance is {q}x{q}")));
    }
    let mut t = omega * 2.0 - omega * sigma * omega;
    symmetrize_in_place(&mut t);
    Ok(t)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// `Φ⁻¹(p)`, refined by one Newton step on `Φ`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level must lie in (0, 1), got {p}")));
    }
    let normal = standard_normal();
    let x = normal.inverse_cdf(p);
    let density = normal.pdf(x);
    if density > 0.0 {
        Ok(x - (normal.cdf(x) - p) / density)
    } else {
        Ok(x)
    }
}

/// Rate regime of the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// `n^{-3/8}` with `h ≍ n^{-1/4}`; smoothing bias is negligible.
    #[default]
    Undersmoothed,
    /// `n^{-2/5}` with `h ≍ n^{-1/5}`; the band ignores an O(1) bias.
    Theorem,
}

impl RateMode {
    pub fn exponent(self) -> f64 {
        match self {
            RateMode::Undersmoothed => 3.0 / 8.0,
            RateMode::Theorem => 2.0 / 5.0,
        }
    }

    pub fn bandwidth_regime(self) -> BandwidthRegime {
        match self {
            RateMode::Undersmoothed => BandwidthRegime::Inference,
            RateMode::Theorem => BandwidthRegime::Estimation,
        }
    }
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMode::Undersmoothed => "undersmoothed",
            RateMode::Theorem => "theorem",
        })
    }
}

impl FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "undersmoothed" => Ok(RateMode::Undersmoothed),
            "theorem" => Ok(RateMode::Theorem),
            other => Err(Error::Parse(format!("unknown rate mode '{other}'"))),
        }
    }
}

/// Pointwise bands `[T̂_uv(z) − δ_uv(z), T̂_uv(z) + δ_uv(z)]` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub grid: IndexGrid,
    pub point: Vec<DMatrix<f64>>,
    pub half_width: Vec<DMatrix<f64>>,
    pub alpha: f64,
    pub rate_mode: RateMode,
}

impl ConfidenceBand {
    pub fn lower(&self, k: usize, u: usize, v: usize) -> f64 {
        self.point[k][(u, v)] - self.half_width[k][(u, v)]
    }

    pub fn upper(&self, k: usize, u: usize, v: usize) -> f64 {
        self.point[k][(u, v)] + self.half_width[k][(u, v)]
    }

    pub fn covers(&self, k: usize, u: usize, v: usize, value: f64) -> bool {
        self.lower(k, u, v) <= value && value <= self.upper(k, u, v)
    }

    pub fn p(&self) -> usize {
        self.point.first().map_or(0, |m| m.nrows())
    }
}

/// Half-width `Φ⁻¹(1−α/2) n^{-r} √((Ω_uv² + Ω_uu Ω_vv) ∫K² / f̂(z))`.
pub fn half_width(omega: &DMatrix<f64>, density: f64, n: usize, alpha: f64, rate_mode: RateMode, kind: KernelKind) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let scale = normal_quantile(1.0 - alpha / 2.0)? * (n as f64).powf(-rate_mode.exponent());
    let roughness = kind.l2_norm();
    let p = omega.nrows();
    Ok(DMatrix::from_fn(p, p, |u, v| {
        let variance = omega[(u, v)].powi(2) + omega[(u, u)] * omega[(v, v)];
        scale * (variance / density * roughness).sqrt()
    }))
}

/// Debiased point estimates and bands at every grid point of `field`.
/// The index density uses the same kernel and bandwidth `h`.
pub fn confidence_band(
    field: &PrecisionField,
    cov: &CovarianceField,
    sample: &IndexedSample,
    alpha: f64,
    rate_mode: RateMode,
    kind: KernelKind,
    h: Bandwidth,
) -> Result<ConfidenceBand> {
    if field.grid != cov.grid {
        return Err(Error::GridMismatch("precision and covariance fields are on different grids".into()));
    }
    let mut point = Vec::with_capacity(field.grid.len());
    let mut widths = Vec::with_capacity(field.grid.len());
    for (k, &z) in field.grid.points().iter().enumerate() {
        let density = density_estimate(z, sample.z(), h, kind);
        if density <= 0.0 {
            return Err(Error::ZeroDensity(z));
        }
        point.push(debias(&field.matrices[k], &cov.matrices[k])?);
        widths.push(half_width(&field.matrices[k], density, sample.n(), alpha, rate_mode, kind)?);
    }
    Ok(ConfidenceBand {
        grid: field.grid.clone(),
        point,
        half_width: widths,
        alpha,
        rate_mode,
    })
}

/// Empirical coverage and band length over replicates, split by the true
/// support and its complement (off-diagonal pairs only).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub replicates: usize,
    pub avgcov_support: Option<f64>,
    pub avgcov_complement: Option<f64>,
    pub avglength_support: Option<f64>,
    pub avglength_complement: Option<f64>,
    /// Coverage frequency per pair, averaged over grid points and replicates.
    #[serde(skip)]
    pub per_pair: DMatrix<f64>,
    /// Mean band length per pair.
    #[serde(skip)]
    pub per_pair_length: DMatrix<f64>,
}

pub fn coverage_tally(truth: &[DMatrix<f64>], support: &EdgeSet, bands: &[ConfidenceBand]) -> Result<CoverageSummary> {
    let first = bands
        .first()
        .ok_or_else(|| Error::InvalidInput("no confidence bands to tally".into()))?;
    let k = truth.len();
    let p = support.p();
    for band in bands {
        if band.point.len() != k || band.grid != first.grid {
            return Err(Error::GridMismatch(format!("band has {} points, truth has {k}", band.point.len())));
        }
        if band.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "band is {}x{0}, support is over {p} nodes",
                band.p()
            )));
        }
    }
    if truth.iter().any(|m| m.nrows() != p || m.ncols() != p) {
        return Err(Error::DimensionMismatch(format!("truth matrices must be {p}x{p}")));
    }
    let trials = (k * bands.len()) as f64;
    let mut per_pair = DMatrix::zeros(p, p);
    let mut per_pair_length = DMatrix::zeros(p, p);
    for band in bands {
        for (kk, target) in truth.iter().enumerate() {
            for u in 0..p {
                for v in 0..p {
                    if band.covers(kk, u, v, target[(u, v)]) {
                        per_pair[(u, v)] += 1.0;
                    }
                    per_pair_length[(u, v)] += 2.0 * band.half_width[kk][(u, v)];
                }
            }
        }
    }
    per_pair /= trials;
    per_pair_length /= trials;

    let mean = |values: Vec<f64>| (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|u| ((u + 1)..p).map(move |v| (u, v))).collect();
    let (on, off): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|&(u, v)| support.contains(u, v));
    Ok(CoverageSummary {
        replicates: bands.len(),
        avgcov_support: mean(on.iter().map(|&(u, v)| per_pair[(u, v)]).collect()),
        avgcov_complement: mean(off.iter().map(|&(u, v)| per_pair[(u, v)]).collect()),
        avglength_support: mean(on.iter().map(|&(u, v)| per_pair_length[(u, v)]).collect()),
        avglength_complement: mean(off.iter().map(|&(u, v)| per_pair_length[(u, v)]).collect()),
        per_pair,
        per_pair_length,
    })
}
