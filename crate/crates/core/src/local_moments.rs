//! Locally weighted mean and covariance estimators on index grids.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Bandwidth, KernelKind, SortedIndex};
use crate::linalg::symmetrize_in_place;

/// `n` observations `(z^i, x^i)` with the index rescaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedSample {
    z: Vec<f64>,
    x: DMatrix<f64>,
}

impl IndexedSample {
    /// Takes `z` already on `[0, 1]`.
    pub fn new(z: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        if z.is_empty() || x.ncols() == 0 {
            return Err(Error::InvalidInput("sample needs n >= 1 and p >= 1".into()));
        }
        if z.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!("{} index values for {} rows", z.len(), x.nrows())));
        }
        if z.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidInput("index values must be finite and lie in [0, 1]".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        Ok(IndexedSample { z, x })
    }

    /// Maps the raw index affinely onto `[0, 1]` (min to 0, max to 1).
    pub fn from_raw_index(z_raw: &[f64], x: DMatrix<f64>) -> Result<Self> {
        IndexedSample::new(rescale_unit(z_raw)?, x)
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Sub-sample keeping the given rows in order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let z = rows.iter().map(|&i| self.z[i]).collect();
        let x = self.x.select_rows(rows.iter());
        IndexedSample::new(z, x)
    }

    /// Pooled covariance `n^{-1} Σ (x^i - x̄)(x^i - x̄)^T`, ignoring the index.
    pub fn pooled_covariance(&self) -> DMatrix<f64> {
        let n = self.n() as f64;
        let mean = self.x.row_mean();
        let mut centered = self.x.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        let mut s = centered.transpose() * &centered / n;
        symmetrize_in_place(&mut s);
        s
    }
}

pub fn rescale_unit(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("index values must be finite".into()));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if raw.is_empty() || hi <= lo {
        return Err(Error::InvalidInput("index variable must take at least two distinct values".into()));
    }
    Ok(raw.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect())
}

/// Strictly increasing evaluation points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexGrid {
    points: Vec<f64>,
}

impl IndexGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("grid must be non-empty".into()));
        }
        if points.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("grid points must lie in [0, 1]".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid points must be strictly increasing".into()));
        }
        Ok(IndexGrid { points })
    }

    /// `K` equally spaced points `0, 1/(K-1), ..., 1`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("uniform grid needs K >= 2, got {k}")));
        }
        let step = 1.0 / (k - 1) as f64;
        let mut points: Vec<f64> = (0..k).map(|i| i as f64 * step).collect();
        points[k - 1] = 1.0;
        IndexGrid::new(points)
    }

    pub fn single(z: f64) -> Result<Self> {
        IndexGrid::new(vec![z])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the closest grid point; ties go to the lower point.
    pub fn nearest(&self, z: f64) -> usize {
        let hi = self.points.partition_point(|&g| g < z);
        if hi == 0 {
            return 0;
        }
        if hi == self.points.len() {
            return hi - 1;
        }
        if self.points[hi] - z < z - self.points[hi - 1] {
            hi
        } else {
            hi - 1
        }
    }
}

pub fn uniform_grid(k: usize) -> Result<IndexGrid> {
    IndexGrid::uniform(k)
}

/// How observations are centred before forming outer products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Each `x^i` centred by its own local mean `m̂(z^i)`.
    #[default]
    PerObservation,
    /// Every `x^i` centred by the local mean at the target point.
    AtTarget,
    /// No centring (zero conditional mean model).
    None,
}

impl fmt::Display for Centering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Centering::PerObservation => "per_observation",
            Centering::AtTarget => "at_target",
            Centering::None => "none",
        })
    }
}

impl FromStr for Centering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_observation" => Ok(Centering::PerObservation),
            "at_target" => Ok(Centering::AtTarget),
            "none" => Ok(Centering::None),
            other => Err(Error::Parse(format!("unknown centering '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub grid: IndexGrid,
    pub means: Vec<DVector<f64>>,
}

/// Kernel-smoothed covariance matrices `Σ̂(z_k)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceField {
    pub grid: IndexGrid,
    pub matrices: Vec<DMatrix<f64>>,
    pub bandwidth: Bandwidth,
    pub kind: KernelKind,
    pub centering: Centering,
}

impl CovarianceField {
    pub fn p(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    /// Restriction to a subset of variables, keeping the grid.
    pub fn restrict(&self, nodes: &[usize]) -> CovarianceField {
        CovarianceField {
            grid: self.grid.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|m| m.select_rows(nodes.iter()).select_columns(nodes.iter()))
                .collect(),
            bandwidth: self.bandwidth,
            kind: self.kind,
            centering: self.centering,
        }
    }

    /// Wraps precomputed matrices (for example a pooled covariance on a
    /// one-point grid). Matrices are symmetrized.
    pub fn from_matrices(
        grid: IndexGrid,
        matrices: Vec<DMatrix<f64>>,
        bandwidth: Bandwidth,
        kind: KernelKind,
        centering: Centering,
    ) -> Result<Self> {
        if grid.len() != matrices.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points, {} matrices",
                grid.len(),
                matrices.len()
            )));
        }
        let p = matrices.first().map_or(0, |m| m.nrows());
        let mut matrices = matrices;
        for m in &mut matrices {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::DimensionMismatch("covariance matrices must share a square shape".into()));
            }
            symmetrize_in_place(m);
        }
        Ok(CovarianceField {
            grid,
            matrices,
            bandwidth,
            kind,
            centering,
        })
    }
}

fn weighted_row_sum(x: &DMatrix<f64>, weights: &[(usize, f64)]) -> DVector<f64> {
    let mut m = DVector::zeros(x.ncols());
    for &(i, w) in weights {
        for j in 0..x.ncols() {
            m[j] += w * x[(i, j)];
        }
    }
    m
}

/// `m̂(z) = Σ_i w^i(z) x^i`.
pub fn local_mean(sample: &IndexedSample, z_query: f64, h: Bandwidth, kind: KernelKind) -> Result<DVector<f64>> {
    let idx = SortedIndex::new(sample.z());
    let w = idx.window(z_query, h, kind)?;
    Ok(weighted_row_sum(sample.x(), &w))
}

pub fn local_mean_field(sample: &IndexedSample, grid: &IndexGrid, h: Bandwidth, kind: KernelKind) -> Result<MeanField> {
    let idx = SortedIndex::new(sample.z());
    let means = grid
        .points()
        .iter()
        .map(|&z| idx.window(z, h, kind).map(|w| weighted_row_sum(sample.x(), &w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanField { grid: grid.clone(), means })
}

/// `Σ̂(z_k) = Σ_i w^i(z_k) (x^i - c^i)(x^i - c^i)^T` at every grid point, with
/// `c^i` chosen by `centering`.
pub fn local_covariance_field(
    sample: &IndexedSample,
    grid: &IndexGrid,
    h: Bandwidth,
    kind: KernelKind,
    centering: Centering,
) -> Result<CovarianceField> {
    let idx = SortedIndex::new(sample.z());
    let x = sample.x();
    let p = sample.p();

    // own-point local means; each z^i is within h of itself so this never fails
    let own_means = match centering {
        Centering::PerObservation => {
            let mut c = DMatrix::zeros(sample.n(), p);
            for (i, &zi) in sample.z().iter().enumerate() {
                let w = idx.window(zi, h, kind)?;
                c.set_row(i, &weighted_row_sum(x, &w).transpose());
            }
            Some(c)
        }
        _ => None,
    };

    let mut matrices = Vec::with_capacity(grid.len());
    for &zk in grid.points() {
        let w = idx.window(zk, h, kind)?;
        let target_mean = match centering {
            Centering::AtTarget => Some(weighted_row_sum(x, &w)),
            _ => None,
        };
        let mut d = DMatrix::zeros(w.len(), p);
        for (r, &(i, wi)) in w.iter().enumerate() {
            let s = wi.sqrt();
            for j in 0..p {
                let c = match (&own_means, &target_mean) {
                    (Some(c), _) => c[(i, j)],
                    (_, Some(m)) => m[j],
                    _ => 0.0,
                };
                d[(r, j)] = s * (x[(i, j)] - c);
            }
        }
        let mut s = d.transpose() * d;
        symmetrize_in_place(&mut s);
        matrices.push(s);
    }
    Ok(CovarianceField {
        grid: grid.clone(),
        matrices,
        bandwidth: h,
        kind,
        centering,
    })
}

/// Anything that stores one `p x p` matrix per grid point.
pub trait GridField {
    fn grid(&self) -> &IndexGrid;
    fn matrices(&self) -> &[DMatrix<f64>];
}

impl GridField for CovarianceField {
    fn grid(&self) -> &IndexGrid {
        &self.grid
    }
    fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Nearest,
    Linear,
}

/// Evaluates a field off-grid. Linear mode interpolates entrywise between the
/// bracketing grid points; for precision fields this stays positive definite
/// (a convex combination of PD matrices).
pub fn interpolate_field<F: GridField + ?Sized>(field: &F, z_query: f64, mode: Interpolation) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&z_query) {
        return Err(Error::InvalidInput(format!("z = {z_query} outside [0, 1]")));
    }
    let pts = field.grid().points();
    let mats = field.matrices();
    match mode {
        Interpolation::Nearest => Ok(mats[field.grid().nearest(z_query)].clone()),
        Interpolation::Linear => {
            let hi = pts.partition_point(|&g| g < z_query);
            if hi < pts.len() && pts[hi] == z_query {
                return Ok(mats[hi].clone());
            }
            if hi == 0 {
                return Ok(mats[0].clone());
            }
            if hi == pts.len() {
                return Ok(mats[hi - 1].clone());
            }
            let t = (z_query - pts[hi - 1]) / (pts[hi] - pts[hi - 1]);
            Ok(&mats[hi - 1] * (1.0 - t) + &mats[hi] * t)
        }
    }
}
