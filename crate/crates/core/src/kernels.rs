//! Compactly supported smoothing kernels, Nadaraya-Watson weights and the
//! kernel density estimate of the index variable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric probability densities supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Epanechnikov,
    Boxcar,
    /// Standard tricube, `(70/81)(1 - |u|^3)^3`.
    Tricube,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Epanechnikov, KernelKind::Boxcar, KernelKind::Tricube];

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelKind::Boxcar => 0.5,
            KernelKind::Tricube => {
                let t = 1.0 - a * a * a;
                70.0 / 81.0 * t * t * t
            }
        }
    }

    /// `∫ K(t)^2 dt`, closed form per kernel.
    pub fn l2_norm(self) -> f64 {
        match self {
            KernelKind::Epanechnikov => 0.6,
            KernelKind::Boxcar => 0.5,
            KernelKind::Tricube => 175.0 / 247.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Boxcar => "boxcar",
            KernelKind::Tricube => "tricube",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "boxcar" => Ok(KernelKind::Boxcar),
            "tricube" => Ok(KernelKind::Tricube),
            other => Err(Error::Parse(format!("unknown kernel '{other}'"))),
        }
    }
}

pub fn kernel_eval(kind: KernelKind, u: f64) -> f64 {
    kind.eval(u)
}

pub fn kernel_l2_norm(kind: KernelKind) -> f64 {
    kind.l2_norm()
}

/// Smoothing bandwidth on the rescaled `[0, 1]` index scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Bandwidth(f64);

/// Which rate the default bandwidth follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthRegime {
    /// `h = c n^{-1/5}`
    Estimation,
    /// `h = c n^{-1/4}`, undersmoothed for inference.
    Inference,
}

impl Bandwidth {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 {
            Ok(Bandwidth(h))
        } else {
            Err(Error::InvalidInput(format!("bandwidth must be positive and finite, got {h}")))
        }
    }

    pub fn for_sample_size(n: usize, multiplier: f64, regime: BandwidthRegime) -> Result<Self> {
        let exponent = match regime {
            BandwidthRegime::Estimation => -0.2,
            BandwidthRegime::Inference => -0.25,
        };
        Bandwidth::new(multiplier * (n.max(1) as f64).powf(exponent))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Normalized kernel weights `w^i = K_h(z^i - z) / Σ_j K_h(z^j - z)`.
pub fn smoothing_weights(z_query: f64, points: &[f64], h: Bandwidth, kind: KernelKind) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no index points".into()));
    }
    let hv = h.value();
    let mut w: Vec<f64> = points.iter().map(|&z| kind.eval((z - z_query) / hv)).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyBandwidth { z: z_query, h: hv });
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// `f̂(z) = (n h)^{-1} Σ_i K((z^i - z)/h)`.
pub fn density_estimate(z_query: f64, points: &[f64], h: Bandwidth, kind: KernelKind) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let hv = h.value();
    let s: f64 = points.iter().map(|&z| kind.eval((z - z_query) / hv)).sum();
    s / (points.len() as f64 * hv)
}

/// Index points sorted once so that kernel windows can be located by binary
/// search. Weights returned by [`SortedIndex::window`] refer to original
/// sample positions.
#[derive(Debug, Clone)]
pub(crate) struct SortedIndex {
    order: Vec<usize>,
    sorted: Vec<f64>,
}

impl SortedIndex {
    pub(crate) fn new(points: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| points[i]).collect();
        SortedIndex { order, sorted }
    }

    /// Normalized non-zero weights around `z_query` as `(sample index, weight)`,
    /// in ascending sample-index order.
    pub(crate) fn window(&self, z_query: f64, h: Bandwidth, kind: KernelKind) -> Result<Vec<(usize, f64)>> {
        let hv = h.value();
        let lo = self.sorted.partition_point(|&z| z < z_query - hv);
        let hi = self.sorted.partition_point(|&z| z <= z_query + hv);
        let mut out: Vec<(usize, f64)> = (lo..hi)
            .filter_map(|k| {
                let w = kind.eval((self.sorted[k] - z_query) / hv);
                (w > 0.0).then_some((self.order[k], w))
            })
            .collect();
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::EmptyBandwidth { z: z_query, h: hv });
        }
        out.sort_by_key(|&(i, _)| i);
        for (_, w) in &mut out {
            *w /= total;
        }
        Ok(out)
    }
}
