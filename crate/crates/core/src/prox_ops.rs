//! Proximal operators used by the solvers.
//!
//! A stack is one `p x p` matrix per grid point. Groups are the ordered
//! off-diagonal pairs `(u, v)`, each spanning the whole stack; diagonals are
//! never penalized.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, symmetrize_in_place, SymEigen};

/// One square matrix per grid point.
pub type MatrixStack = Vec<DMatrix<f64>>;

/// Euclidean norm of each ordered pair across the stack, `√(Σ_k A_uv(z_k)^2)`.
/// Diagonal entries are left at zero.
pub fn group_norms(stack: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = stack.first().map_or(0, |m| m.nrows());
    let mut norms = DMatrix::zeros(p, p);
    for m in stack {
        for v in 0..p {
            for u in 0..p {
                if u != v {
                    norms[(u, v)] += m[(u, v)] * m[(u, v)];
                }
            }
        }
    }
    norms.apply(|x: &mut f64| *x = x.sqrt());
    norms
}

/// Block soft-thresholding: every off-diagonal entry is scaled by
/// `(1 - t / g_uv)_+`. Groups with `g_uv <= t` become exact zeros.
pub fn group_prox(stack: &[DMatrix<f64>], t: f64) -> MatrixStack {
    let norms = group_norms(stack);
    let p = norms.nrows();
    let scale = DMatrix::from_fn(p, p, |u, v| {
        if u == v {
            1.0
        } else {
            let g = norms[(u, v)];
            if g <= t {
                0.0
            } else {
                1.0 - t / g
            }
        }
    });
    stack.iter().map(|m| m.component_mul(&scale)).collect()
}

#[inline]
fn soft(a: f64, t: f64) -> f64 {
    if a > t {
        a - t
    } else if a < -t {
        a + t
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding of the off-diagonal entries, independently
/// per grid point.
pub fn soft_threshold_prox(stack: &[DMatrix<f64>], t: f64) -> MatrixStack {
    stack
        .iter()
        .map(|m| DMatrix::from_fn(m.nrows(), m.ncols(), |u, v| if u == v { m[(u, v)] } else { soft(m[(u, v)], t) }))
        .collect()
}

/// Output of [`logdet_prox`] with the eigenvalues kept so that callers can
/// read off `log det` without another factorization.
#[derive(Debug, Clone)]
pub struct LogdetProx {
    pub matrix: DMatrix<f64>,
    /// `ω_i`, ascending.
    pub eigenvalues: DVector<f64>,
}

impl LogdetProx {
    pub fn log_det(&self) -> f64 {
        self.eigenvalues.iter().map(|w| w.ln()).sum()
    }
}

/// `argmin_{Ω ≻ 0} L/2 ‖Ω - A‖_F^2 - log det Ω`.
///
/// With `L A = Q diag(λ) Q^T` the minimizer is `Q diag(ω) Q^T` where
/// `ω_i = (λ_i + √(λ_i^2 + 4L)) / (2L)` is the positive root of `L ω - 1/ω = λ_i`.
pub fn logdet_prox(a: &DMatrix<f64>, l: f64) -> Result<LogdetProx> {
    let asym = asymmetry(a);
    if asym > 1e-8 {
        return Err(Error::NotSymmetric(asym));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidInput(format!("prox parameter must be positive, got {l}")));
    }
    let mut sym = a.clone();
    symmetrize_in_place(&mut sym);
    Ok(logdet_prox_sym(&sym, l))
}

pub(crate) fn logdet_prox_sym(a: &DMatrix<f64>, l: f64) -> LogdetProx {
    let eig = SymEigen::new(&(a * l));
    let omega = |lam: f64| {
        // stable form of the positive root when λ is very negative
        let disc = (lam * lam + 4.0 * l).sqrt();
        if lam >= 0.0 {
            (lam + disc) / (2.0 * l)
        } else {
            2.0 / (disc - lam)
        }
    };
    let eigenvalues = eig.values.map(omega);
    let matrix = eig.map(omega);
    LogdetProx { matrix, eigenvalues }
}

/// Gradient of the β-Moreau envelope of `λ Σ_{u≠v} ‖Ω_uv(·)‖_2`:
/// `(Ω - group_prox(Ω, λβ)) / β`.
pub fn moreau_gradient(stack: &[DMatrix<f64>], lambda: f64, beta: f64) -> MatrixStack {
    let shrunk = group_prox(stack, lambda * beta);
    stack.iter().zip(shrunk).map(|(m, s)| (m - s) / beta).collect()
}
