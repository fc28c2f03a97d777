//! Support-recovery metrics, estimation error, the quadratic-mean operator,
//! cross-validation and the simulation drivers.

mod cv;
mod experiments;

pub use cv::{cv_loss, point_loss, CvFitConfig, CvMode, CvResult};
pub use experiments::{
    default_lambda_path, matrix_support, run_coverage_experiment, run_recovery_experiment, run_scaling_experiment, scaling_sample_size,
    simulation_lambda, CoverageConfig, FitMethod, PrRow, RecoveryConfig, RecoveryTable, ScalingConfig, ScalingRow,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::solvers::PrecisionField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hamming: usize,
}

/// Precision is 1 for an empty estimate and recall is 1 for an empty truth.
pub fn recovery_metrics(estimated: &EdgeSet, truth: &EdgeSet) -> RecoveryMetrics {
    let hits = estimated.intersection_len(truth);
    let precision = if estimated.is_empty() {
        1.0
    } else {
        hits as f64 / estimated.len() as f64
    };
    let recall = if truth.is_empty() { 1.0 } else { hits as f64 / truth.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let hamming = estimated.len() + truth.len() - 2 * hits;
    RecoveryMetrics {
        precision,
        recall,
        f1,
        hamming,
    }
}

/// Mean over grid points of `‖Ω̂(z_k) − Ω*(z_k)‖_F²`.
pub fn frobenius_error(estimate: &PrecisionField, truth: &[DMatrix<f64>]) -> Result<f64> {
    if estimate.matrices.len() != truth.len() {
        return Err(Error::GridMismatch(format!(
            "{} estimates, {} truth matrices",
            estimate.matrices.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("no grid points".into()));
    }
    let mut total = 0.0;
    for (a, b) in estimate.matrices.iter().zip(truth) {
        if a.shape() != b.shape() {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        total += (a - b).norm_squared();
    }
    Ok(total / truth.len() as f64)
}

/// Entrywise quadratic mean of a matrix-valued function sampled at index
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMeanMatrix(pub DMatrix<f64>);

impl QuadMeanMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Smallest entry over the edges, the signal strength of a support.
    pub fn min_over(&self, edges: &EdgeSet) -> Option<f64> {
        edges.iter().map(|(u, v)| self.0[(u, v)]).reduce(f64::min)
    }
}

pub fn quad_mean(samples: &[DMatrix<f64>]) -> Result<QuadMeanMatrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("quadratic mean of an empty list".into()))?;
    let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
    for m in samples {
        if m.shape() != first.shape() {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", m.shape(), first.shape())));
        }
        acc += m.component_mul(m);
    }
    acc /= samples.len() as f64;
    acc.apply(|x: &mut f64| *x = x.sqrt());
    Ok(QuadMeanMatrix(acc))
}

/// Largest absolute row sum.
pub fn norm_inf_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn norm_max(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// One side-by-side evaluation of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Evaluates the five quadratic-mean norm bounds on paired samples `A(x^i)`,
/// `B(x^i)`:
///
/// 0. `‖H(A)‖_{∞,∞} ≤ max_i ‖A(x^i)‖_{∞,∞}`
/// 1. `‖H(A)‖_∞ ≤ max_i ‖A(x^i)‖_∞`
/// 2. `‖H(AB)‖_{∞,∞} ≤ ‖H(A)‖_{∞,∞} ‖H(B)‖_{∞,∞}`
/// 3. `‖H(AB)‖_∞ ≤ ‖H(A)‖_∞ ‖H(B)‖_{∞,∞}`
/// 4. `‖H(A + B)‖_∞ ≤ ‖H(A) + H(B)‖_∞`
///
/// Here `‖·‖_{∞,∞}` is the largest absolute row sum and `‖·‖_∞` the largest
/// absolute entry.
pub fn quad_mean_bounds(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> Result<[InequalityCheck; 5]> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let ha = quad_mean(a)?;
    let hb = quad_mean(b)?;
    let products: Vec<DMatrix<f64>> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let sums: Vec<DMatrix<f64>> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let hab = quad_mean(&products)?;
    let hsum = quad_mean(&sums)?;
    let max_of = |f: fn(&DMatrix<f64>) -> f64| a.iter().map(f).fold(0.0, f64::max);
    Ok([
        InequalityCheck {
            lhs: norm_inf_inf(&ha.0),
            rhs: max_of(norm_inf_inf),
        },
        InequalityCheck {
            lhs: norm_max(&ha.0),
            rhs: max_of(norm_max),
        },
        InequalityCheck {
            lhs: norm_inf_inf(&hab.0),
            rhs: norm_inf_inf(&ha.0) * norm_inf_inf(&hb.0),
        },
        InequalityCheck {
            lhs: norm_max(&hab.0),
            rhs: norm_max(&ha.0) * norm_inf_inf(&hb.0),
        },
        InequalityCheck {
            lhs: norm_max(&hsum.0),
            rhs: norm_max(&(&ha.0 + &hb.0)),
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_moments::IndexGrid;

    fn edges(p: usize, pairs: &[(usize, usize)]) -> EdgeSet {
        EdgeSet::from_pairs(p, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn metric_examples() {
        let s = edges(5, &[(0, 1), (1, 2)]);
        assert_eq!(
            recovery_metrics(&s, &s),
            RecoveryMetrics {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                hamming: 0
            }
        );
        let m = recovery_metrics(&EdgeSet::new(5), &s);
        assert_eq!((m.precision, m.recall, m.f1, m.hamming), (1.0, 0.0, 0.0, 2));
        // |S| = 10, |Ŝ| = 8, overlap 6
        let all: Vec<(usize, usize)> = (0..6).flat_map(|u| ((u + 1)..6).map(move |v| (u, v))).collect();
        let truth = edges(6, &all[..10]);
        let est = edges(6, &[&all[..6], &all[10..12]].concat());
        let m = recovery_metrics(&est, &truth);
        assert_eq!((m.precision, m.recall, m.hamming), (0.75, 0.6, 6));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn frobenius_examples() {
        let grid = IndexGrid::uniform(3).unwrap();
        let eye = vec![DMatrix::<f64>::identity(4, 4); 3];
        let field = PrecisionField::new(grid, eye.clone(), 1e-4).unwrap();
        assert_eq!(frobenius_error(&field, &eye).unwrap(), 0.0);
        assert_eq!(frobenius_error(&field, &vec![DMatrix::zeros(4, 4); 3]).unwrap(), 4.0);
        assert!(frobenius_error(&field, &eye[..2]).is_err());
    }

    #[test]
    fn quad_mean_examples() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.0, 3.5, -0.5, 4.0]);
        assert_eq!(quad_mean(&[a.clone()]).unwrap().0, a.abs());
        assert!((quad_mean(&[a.clone(), -a.clone()]).unwrap().0 - a.abs()).amax() < 1e-15);
        assert!(quad_mean(&[]).is_err());
        let q = quad_mean(&[
            DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 4.0, 4.0, 0.0]),
        ])
        .unwrap();
        assert_eq!(q.min_over(&edges(2, &[(0, 1)])), Some(12.5f64.sqrt()));
    }

    #[test]
    fn row_sum_bound_fails_on_two_point_example() {
        let a = [
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        ];
        let checks = quad_mean_bounds(&a, &a).unwrap();
        assert!((checks[0].lhs - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(checks[0].rhs, 1.0);
        assert!(!checks[0].holds(1e-12));
    }

    #[test]
    fn product_bounds_fail_on_scalar_example() {
        let a = [DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.0)];
        let checks = quad_mean_bounds(&a, &a).unwrap();
        assert!((checks[2].lhs - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((checks[2].rhs - 0.5).abs() < 1e-15);
        assert!(!checks[2].holds(1e-12));
        assert!(!checks[3].holds(1e-12));
        assert!(checks[1].holds(0.0) && checks[4].holds(0.0));
    }
}
