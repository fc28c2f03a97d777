use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::objective::objective_from_parts;
use super::{check_covariances, diagonal_start, Penalty, PrecisionField, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::symmetrize_in_place;
use crate::local_moments::CovarianceField;
use crate::prox_ops::{group_prox, logdet_prox_sym, soft_threshold_prox, MatrixStack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub lambda: f64,
    pub rho: f64,
    pub max_iter: usize,
    /// Bound on `max(primal, dual)` residual norms.
    pub tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda: 0.0,
            rho: 1.0,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

impl AdmmConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        AdmmConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda >= 0.0 && self.lambda.is_finite() && self.rho > 0.0 && self.tol > 0.0 && self.max_iter > 0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid ADMM configuration {self:?}")))
        }
    }
}

/// Consensus ADMM on `Ω(z_k) = Ψ(z_k)`. The returned field holds the positive
/// definite `Ω` block; group norms and support come from the exactly sparse
/// `Ψ` block with tolerance zero.
pub fn fit_admm(cov: &CovarianceField, config: &AdmmConfig) -> Result<(PrecisionField, SolveReport)> {
    let (omega, psi, report) = admm_solve(&cov.matrices, config, Penalty::Group)?;
    let field = PrecisionField::with_sparse_companion(cov.grid.clone(), omega, &psi, 0.0)?;
    Ok((field, report))
}

/// Returns `(Ω, Ψ, report)`.
pub(crate) fn admm_solve(
    sigmas: &[DMatrix<f64>],
    config: &AdmmConfig,
    penalty: Penalty,
) -> Result<(MatrixStack, MatrixStack, SolveReport)> {
    config.validate()?;
    check_covariances(sigmas)?;
    let start = Instant::now();
    let rho = config.rho;
    let lambda = config.lambda;

    let mut psi: MatrixStack = sigmas.iter().map(diagonal_start).collect();
    let mut dual: MatrixStack = sigmas.iter().map(|s| DMatrix::zeros(s.nrows(), s.ncols())).collect();
    let init_log_dets: Vec<f64> = psi.iter().map(|m| m.diagonal().iter().map(|d| d.ln()).sum()).collect();
    let mut omega = psi.clone();
    let mut objective = objective_from_parts(&omega, sigmas, &init_log_dets, lambda, penalty);
    let mut trace = vec![objective];
    let mut seconds = vec![start.elapsed().as_secs_f64()];
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        iterations = k;
        let mut log_dets = Vec::with_capacity(sigmas.len());
        let mut next_omega = Vec::with_capacity(sigmas.len());
        for ((ps, du), sigma) in psi.iter().zip(&dual).zip(sigmas) {
            let mut a = ps - du - sigma / rho;
            symmetrize_in_place(&mut a);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    iteration: k,
                    message: "non-finite prox argument".into(),
                });
            }
            let prox = logdet_prox_sym(&a, rho);
            log_dets.push(prox.log_det());
            next_omega.push(prox.matrix);
        }
        omega = next_omega;

        let shifted: MatrixStack = omega.iter().zip(&dual).map(|(o, d)| o + d).collect();
        let next_psi = match penalty {
            Penalty::Group => group_prox(&shifted, lambda / rho),
            Penalty::Elementwise => soft_threshold_prox(&shifted, lambda / rho),
        };

        let mut primal = 0.0;
        let mut dual_res = 0.0;
        for i in 0..sigmas.len() {
            let r = &omega[i] - &next_psi[i];
            primal += r.norm_squared();
            dual_res += (&next_psi[i] - &psi[i]).norm_squared();
            dual[i] += r;
        }
        let primal = primal.sqrt();
        let dual_res = rho * dual_res.sqrt();
        psi = next_psi;

        objective = objective_from_parts(&omega, sigmas, &log_dets, lambda, penalty);
        trace.push(objective);
        seconds.push(start.elapsed().as_secs_f64());
        if primal.max(dual_res) <= config.tol {
            converged = true;
            break;
        }
    }

    let report = SolveReport {
        iterations,
        objective_trace: trace,
        seconds_trace: seconds,
        converged,
        final_objective: objective,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((omega, psi, report))
}
