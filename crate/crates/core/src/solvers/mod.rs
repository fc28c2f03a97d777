//! Penalized local likelihood solvers and their supporting pieces.
//!
//! The objective over a grid `z_1..z_K` is
//!
//! ```text
//! Σ_k [ tr(Σ̂(z_k) Ω(z_k)) - log det Ω(z_k) ] + λ Σ_{u≠v} √(Σ_k Ω_uv(z_k)^2)
//! ```
//!
//! [`fit_prisma`] runs the accelerated proximal smoothing scheme, [`fit_admm`]
//! a consensus ADMM used as a reference, and [`baselines`] holds the
//! single-matrix graphical lasso variants.

mod admm;
pub mod baselines;
mod objective;
mod prisma;
mod screening;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::local_moments::{GridField, IndexGrid};
use crate::prox_ops::group_norms;

pub use admm::{fit_admm, AdmmConfig};
pub use baselines::{fit_glasso_static, fit_pointwise_lasso, glasso_admm, glasso_on};
pub use objective::{ccs_objective, penalized_objective};
pub use prisma::{fit_prisma, prisma_solve};
pub use screening::{fit_prisma_screened, lambda_grid, lambda_max, screen_components};

/// Which non-smooth penalty is applied to off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `λ Σ_{u≠v} ‖Ω_uv(·)‖_2` across grid points.
    #[default]
    Group,
    /// `λ Σ_k Σ_{u≠v} |Ω_uv(z_k)|`.
    Elementwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant,
    /// `β_k = β / k`. Drives the smoothing to zero so inactive groups
    /// shrink below the support threshold.
    #[default]
    InverseK,
}

impl fmt::Display for BetaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaSchedule::Constant => "constant",
            BetaSchedule::InverseK => "inverse_k",
        })
    }
}

impl FromStr for BetaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(BetaSchedule::Constant),
            "inverse_k" => Ok(BetaSchedule::InverseK),
            other => Err(Error::Parse(format!("unknown beta schedule '{other}'"))),
        }
    }
}

/// Parameters for [`fit_prisma`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    /// `L_f`, Lipschitz constant of the smooth trace term.
    pub lipschitz: f64,
    /// Moreau smoothing parameter.
    pub beta: f64,
    pub beta_schedule: BetaSchedule,
    pub max_iter: usize,
    /// Relative objective change that ends the iteration.
    pub rel_tol: f64,
    /// Quadratic-mean group norm above which an edge enters the support.
    pub support_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.0,
            lipschitz: 0.1,
            beta: 0.1,
            beta_schedule: BetaSchedule::InverseK,
            max_iter: 2000,
            rel_tol: 1e-7,
            support_tol: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda >= 0.0
            && self.lambda.is_finite()
            && self.lipschitz > 0.0
            && self.beta > 0.0
            && self.rel_tol > 0.0
            && self.support_tol >= 0.0
            && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid solver configuration {self:?}")))
        }
    }

    pub(crate) fn beta_at(&self, k: usize) -> f64 {
        match self.beta_schedule {
            BetaSchedule::Constant => self.beta,
            BetaSchedule::InverseK => self.beta / k as f64,
        }
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Objective at the initial point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    /// Elapsed seconds matching each `objective_trace` entry.
    pub seconds_trace: Vec<f64>,
    pub converged: bool,
    pub final_objective: f64,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
            })
        }
    }
}

/// Estimated precision matrices on a grid with the edge support read off the
/// quadratic-mean group norms.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionField {
    pub grid: IndexGrid,
    pub matrices: Vec<DMatrix<f64>>,
    /// `√(K^{-1} Σ_k Ω_uv(z_k)^2)`, symmetric with zero diagonal.
    pub group_norms: DMatrix<f64>,
    pub support: EdgeSet,
    pub support_tol: f64,
}

impl PrecisionField {
    /// Builds the field, taking group norms from `matrices` themselves.
    pub fn new(grid: IndexGrid, matrices: Vec<DMatrix<f64>>, support_tol: f64) -> Result<Self> {
        let norms = quad_mean_norms(&matrices);
        PrecisionField::with_norms(grid, matrices, norms, support_tol)
    }

    /// Builds the field with group norms taken from a separate (for example
    /// exactly sparse) stack of the same shape.
    pub fn with_sparse_companion(grid: IndexGrid, matrices: Vec<DMatrix<f64>>, sparse: &[DMatrix<f64>], support_tol: f64) -> Result<Self> {
        let norms = quad_mean_norms(sparse);
        PrecisionField::with_norms(grid, matrices, norms, support_tol)
    }

    fn with_norms(grid: IndexGrid, matrices: Vec<DMatrix<f64>>, group_norms: DMatrix<f64>, support_tol: f64) -> Result<Self> {
        if grid.len() != matrices.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points, {} matrices",
                grid.len(),
                matrices.len()
            )));
        }
        let p = group_norms.nrows();
        let mut support = EdgeSet::new(p);
        for u in 0..p {
            for v in (u + 1)..p {
                if group_norms[(u, v)] > support_tol {
                    support.insert(u, v)?;
                }
            }
        }
        Ok(PrecisionField {
            grid,
            matrices,
            group_norms,
            support,
            support_tol,
        })
    }

    pub fn p(&self) -> usize {
        self.group_norms.nrows()
    }
}

impl GridField for PrecisionField {
    fn grid(&self) -> &IndexGrid {
        &self.grid
    }
    fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }
}

fn quad_mean_norms(stack: &[DMatrix<f64>]) -> DMatrix<f64> {
    let k = stack.len().max(1) as f64;
    let mut norms = group_norms(stack) / k.sqrt();
    // mirror pairs should agree already; average away rounding
    crate::linalg::symmetrize_in_place(&mut norms);
    norms
}

/// Unordered pairs whose quadratic-mean group norm exceeds `tol`.
pub fn extract_support(field: &PrecisionField, tol: f64) -> EdgeSet {
    let p = field.p();
    let mut support = EdgeSet::new(p);
    for u in 0..p {
        for v in (u + 1)..p {
            if field.group_norms[(u, v)] > tol {
                support.insert(u, v).expect("indices in range");
            }
        }
    }
    support
}

/// `(diag(Σ̂) + 1e-6 I)^{-1}`, the starting point of both solvers.
pub(crate) fn diagonal_start(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let p = sigma.nrows();
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / (sigma[(i, i)] + 1e-6) } else { 0.0 })
}

pub(crate) fn check_covariances(sigmas: &[DMatrix<f64>]) -> Result<usize> {
    let p = sigmas
        .first()
        .map(|m| m.nrows())
        .ok_or_else(|| Error::InvalidInput("empty covariance stack".into()))?;
    if p == 0 || sigmas.iter().any(|m| m.nrows() != p || m.ncols() != p) {
        return Err(Error::DimensionMismatch(
            "covariance matrices must share a non-empty square shape".into(),
        ));
    }
    if sigmas.iter().flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("covariance entries must be finite".into()));
    }
    Ok(p)
}
