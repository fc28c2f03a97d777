use std::time::Instant;

use nalgebra::DMatrix;

use super::objective::objective_from_parts;
use super::{check_covariances, diagonal_start, Penalty, PrecisionField, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::symmetrize_in_place;
use crate::local_moments::CovarianceField;
use crate::prox_ops::{group_prox, logdet_prox_sym, soft_threshold_prox, MatrixStack};

/// Accelerated proximal iterative smoothing on the covariance field.
///
/// Returns the last `Θ` iterate (always positive definite) together with the
/// objective trace. Hitting `max_iter` is not an error: the report carries
/// `converged = false`.
pub fn fit_prisma(cov: &CovarianceField, config: &SolverConfig) -> Result<(PrecisionField, SolveReport)> {
    let (theta, report) = prisma_solve(&cov.matrices, config, Penalty::Group)?;
    let field = PrecisionField::new(cov.grid.clone(), theta, config.support_tol)?;
    Ok((field, report))
}

/// Solver core on a bare covariance stack.
pub fn prisma_solve(sigmas: &[DMatrix<f64>], config: &SolverConfig, penalty: Penalty) -> Result<(MatrixStack, SolveReport)> {
    config.validate()?;
    check_covariances(sigmas)?;
    let start = Instant::now();
    let lambda = config.lambda;

    let mut theta_prev: MatrixStack = sigmas.iter().map(diagonal_start).collect();
    let init_log_dets: Vec<f64> = theta_prev.iter().map(|m| m.diagonal().iter().map(|d| d.ln()).sum()).collect();
    let mut objective = objective_from_parts(&theta_prev, sigmas, &init_log_dets, lambda, penalty);
    let mut trace = vec![objective];
    let mut seconds = vec![start.elapsed().as_secs_f64()];

    let mut omega = theta_prev.clone();
    // α_1 = 1 so the first momentum coefficient is zero
    let mut alpha = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        iterations = k;
        let beta = config.beta_at(k);
        // without a penalty the smoothed term is identically zero
        let step_l = if lambda > 0.0 {
            config.lipschitz + 1.0 / beta
        } else {
            config.lipschitz
        };

        let shrunk = if lambda > 0.0 {
            match penalty {
                Penalty::Group => group_prox(&omega, beta * lambda),
                Penalty::Elementwise => soft_threshold_prox(&omega, beta * lambda),
            }
        } else {
            omega.clone()
        };

        let mut theta = Vec::with_capacity(sigmas.len());
        let mut log_dets = Vec::with_capacity(sigmas.len());
        for ((om, sh), sigma) in omega.iter().zip(&shrunk).zip(sigmas) {
            // U = Ω - prox(Ω); A = Ω - (Σ̂ + U/β)/L
            let u = om - sh;
            let mut a = om - (sigma + u / beta) / step_l;
            symmetrize_in_place(&mut a);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    iteration: k,
                    message: "non-finite prox argument".into(),
                });
            }
            let prox = logdet_prox_sym(&a, step_l);
            log_dets.push(prox.log_det());
            theta.push(prox.matrix);
        }

        let next = objective_from_parts(&theta, sigmas, &log_dets, lambda, penalty);
        if !next.is_finite() {
            return Err(Error::Numerical {
                iteration: k,
                message: "objective is not finite".into(),
            });
        }

        let alpha_next = 0.5 * (1.0 + (1.0 + 4.0 * alpha * alpha).sqrt());
        let momentum = (alpha - 1.0) / alpha_next;
        omega = theta.iter().zip(&theta_prev).map(|(t, tp)| t + (t - tp) * momentum).collect();
        theta_prev = theta;
        alpha = alpha_next;

        let change = (next - objective).abs();
        objective = next;
        trace.push(objective);
        seconds.push(start.elapsed().as_secs_f64());
        if change <= config.rel_tol * objective_scale(trace[trace.len() - 2]) {
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
    Ok((theta_prev, report))
}

pub(crate) fn objective_scale(v: f64) -> f64 {
    v.abs().max(f64::MIN_POSITIVE)
}
