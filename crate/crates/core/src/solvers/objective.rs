use nalgebra::DMatrix;

use super::Penalty;
use crate::error::{Error, Result};
use crate::linalg::{log_det_pd, min_eigenvalue};
use crate::local_moments::CovarianceField;
use crate::prox_ops::group_norms;

pub(crate) fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn penalty_value(stack: &[DMatrix<f64>], penalty: Penalty) -> f64 {
    match penalty {
        Penalty::Group => group_norms(stack).sum(),
        Penalty::Elementwise => stack
            .iter()
            .map(|m| {
                let p = m.nrows();
                let mut s = 0.0;
                for u in 0..p {
                    for v in 0..p {
                        if u != v {
                            s += m[(u, v)].abs();
                        }
                    }
                }
                s
            })
            .sum(),
    }
}

/// Penalized objective with log-determinants supplied by the caller (the
/// solvers already hold the eigenvalues of each iterate).
pub(crate) fn objective_from_parts(
    stack: &[DMatrix<f64>],
    sigmas: &[DMatrix<f64>],
    log_dets: &[f64],
    lambda: f64,
    penalty: Penalty,
) -> f64 {
    let smooth: f64 = stack
        .iter()
        .zip(sigmas)
        .zip(log_dets)
        .map(|((o, s), ld)| trace_product(s, o) - ld)
        .sum();
    if lambda == 0.0 {
        smooth
    } else {
        smooth + lambda * penalty_value(stack, penalty)
    }
}

/// Objective for an arbitrary stack against raw covariance matrices.
pub fn penalized_objective(stack: &[DMatrix<f64>], sigmas: &[DMatrix<f64>], lambda: f64, penalty: Penalty) -> Result<f64> {
    if stack.len() != sigmas.len() {
        return Err(Error::GridMismatch(format!(
            "{} matrices against {} covariances",
            stack.len(),
            sigmas.len()
        )));
    }
    let mut log_dets = Vec::with_capacity(stack.len());
    for (index, m) in stack.iter().enumerate() {
        if m.shape() != sigmas[index].shape() {
            return Err(Error::DimensionMismatch("stack and covariance shapes differ".into()));
        }
        match log_det_pd(m) {
            Some(ld) => log_dets.push(ld),
            None => {
                return Err(Error::NotPositiveDefinite {
                    index,
                    min_eigenvalue: min_eigenvalue(m),
                })
            }
        }
    }
    Ok(objective_from_parts(stack, sigmas, &log_dets, lambda, penalty))
}

/// `Σ_k [tr(Σ̂(z_k)Ω(z_k)) - log det Ω(z_k)] + λ Σ_{v≠u} √(Σ_k Ω_vu(z_k)^2)`.
pub fn ccs_objective(stack: &[DMatrix<f64>], cov: &CovarianceField, lambda: f64) -> Result<f64> {
    penalized_objective(stack, &cov.matrices, lambda, Penalty::Group)
}
