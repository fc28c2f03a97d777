//! Independent reference computations shared by the integration tests.
//! None of these call into the estimator's own numerical routines.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-scale..scale));
    (&a + a.transpose()) * 0.5
}

/// `B B^T / p + shift I`, comfortably positive definite.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize, shift: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() / p as f64 + DMatrix::identity(p, p) * shift
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Cholesky-based log determinant, `None` when not positive definite.
pub fn chol_log_det(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return None;
        }
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Some((0..n).map(|j| 2.0 * l[(j, j)].ln()).sum())
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
        a.swap_rows(c, piv);
        inv.swap_rows(c, piv);
        let d = a[(c, c)];
        for j in 0..n {
            a[(c, j)] /= d;
            inv[(c, j)] /= d;
        }
        for i in 0..n {
            if i != c {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..n {
                        a[(i, j)] -= f * a[(c, j)];
                        inv[(i, j)] -= f * inv[(c, j)];
                    }
                }
            }
        }
    }
    inv
}

/// Brute-force objective: per-point trace and Cholesky log det, then the
/// group penalty summed over ordered off-diagonal pairs.
pub fn objective_oracle(stack: &[DMatrix<f64>], sigmas: &[DMatrix<f64>], lambda: f64) -> f64 {
    let p = stack[0].nrows();
    let mut total = 0.0;
    for (o, s) in stack.iter().zip(sigmas) {
        let mut tr = 0.0;
        for i in 0..p {
            for j in 0..p {
                tr += s[(i, j)] * o[(j, i)];
            }
        }
        total += tr - chol_log_det(o).expect("positive definite");
    }
    for u in 0..p {
        for v in 0..p {
            if u != v {
                total += lambda * stack.iter().map(|m| m[(u, v)] * m[(u, v)]).sum::<f64>().sqrt();
            }
        }
    }
    total
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    // the boundaries matter: the minimizer is often exactly zero
    [0.0, mid].into_iter().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap()
}

/// Numeric minimizer of `½‖X - a‖² + t‖X‖₂` over a vector, found by a line
/// search along `a` and then checked against random perturbations.
pub fn numeric_group_vector_prox(a: &[f64], t: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f = |x: &[f64]| -> f64 {
        let sq: f64 = x.iter().zip(a).map(|(xi, ai)| (xi - ai) * (xi - ai)).sum();
        0.5 * sq + t * x.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let along = |s: f64| f(&a.iter().map(|v| s * v).collect::<Vec<_>>());
    let s = golden_section(along, 0.0, 1.0);
    let x: Vec<f64> = a.iter().map(|v| s * v).collect();
    let base = f(&x);
    for _ in 0..200 {
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1e-3..1e-3)).collect();
        assert!(f(&y) >= base - 1e-12, "perturbation improved the prox objective");
    }
    x
}

/// Entrywise numeric group prox of a stack, groups being ordered
/// off-diagonal pairs across the stack and diagonals left free.
pub fn numeric_group_prox(stack: &[DMatrix<f64>], t: f64, rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    let p = stack[0].nrows();
    let mut out: Vec<DMatrix<f64>> = stack.to_vec();
    for u in 0..p {
        for v in 0..p {
            if u == v {
                continue;
            }
            let a: Vec<f64> = stack.iter().map(|m| m[(u, v)]).collect();
            let x = numeric_group_vector_prox(&a, t, rng);
            for (k, m) in out.iter_mut().enumerate() {
                m[(u, v)] = x[k];
            }
        }
    }
    out
}

/// Backtracking gradient descent on `L/2 ‖Ω - A‖² - log det Ω` over symmetric
/// positive definite matrices.
pub fn numeric_logdet_prox(a: &DMatrix<f64>, l: f64) -> DMatrix<f64> {
    let p = a.nrows();
    let f = |o: &DMatrix<f64>| chol_log_det(o).map(|ld| 0.5 * l * (o - a).norm_squared() - ld);
    let mut omega = DMatrix::<f64>::identity(p, p);
    let mut fo = f(&omega).unwrap();
    let mut step = 1.0;
    for _ in 0..200_000 {
        let grad = (&omega - a) * l - gauss_inverse(&omega);
        let gmax = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax < 1e-11 {
            break;
        }
        step *= 2.0;
        loop {
            let cand = &omega - &grad * step;
            let cand = (&cand + cand.transpose()) * 0.5;
            match f(&cand) {
                Some(fc) if fc <= fo - 0.5 * step * grad.norm_squared() => {
                    omega = cand;
                    fo = fc;
                    break;
                }
                _ => step *= 0.5,
            }
            if step < 1e-20 {
                return omega;
            }
        }
    }
    omega
}

/// `vec(T) = vec(Ω) - (Ω ⊗ Ω) vec(Σ - Ω^{-1})` with the Kronecker product
/// written out entry by entry.
pub fn kronecker_debias(omega: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let p = omega.nrows();
    let diff = sigma - gauss_inverse(omega);
    let vec_diff: Vec<f64> = (0..p * p).map(|i| diff[(i % p, i / p)]).collect();
    let mut kron = DMatrix::<f64>::zeros(p * p, p * p);
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                for m in 0..p {
                    kron[(i * p + k, j * p + m)] = omega[(i, j)] * omega[(k, m)];
                }
            }
        }
    }
    let mut out = omega.clone();
    for r in 0..p * p {
        let s: f64 = (0..p * p).map(|c| kron[(r, c)] * vec_diff[c]).sum();
        out[(r % p, r / p)] -= s;
    }
    out
}

/// Standard normal CDF from composite Simpson integration of the density.
pub fn simpson_normal_cdf(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(0.0) + phi(x);
    for i in 1..n {
        s += phi(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

pub fn bisection_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if simpson_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

use condcov::kernels::{Bandwidth, BandwidthRegime, KernelKind};
use condcov::local_moments::{local_covariance_field, Centering, CovarianceField, IndexGrid};
use condcov::synthetic::{sample_dataset, GraphKind, PathKind, ScenarioSpec};

pub fn field_of(matrices: Vec<DMatrix<f64>>) -> CovarianceField {
    let grid = IndexGrid::uniform(matrices.len()).unwrap_or_else(|_| IndexGrid::single(0.5).unwrap());
    let grid = if matrices.len() == 1 {
        IndexGrid::single(0.5).unwrap()
    } else {
        grid
    };
    CovarianceField::from_matrices(
        grid,
        matrices,
        Bandwidth::new(0.1).unwrap(),
        KernelKind::Epanechnikov,
        Centering::PerObservation,
    )
    .unwrap()
}

/// Kernel-smoothed covariance of a chain scenario with sine paths, bandwidth
/// `n^{-1/5}`.
pub fn chain_instance(n: usize, p: usize, k: usize, scenario_seed: u64, data_seed: u64) -> CovarianceField {
    let scenario = ScenarioSpec::generate(GraphKind::Chain, p, PathKind::Sin, scenario_seed).unwrap();
    let grid = IndexGrid::uniform(k).unwrap();
    let data = sample_dataset(&scenario, n, &grid, data_seed).unwrap();
    let h = Bandwidth::for_sample_size(n, 1.0, BandwidthRegime::Estimation).unwrap();
    local_covariance_field(&data.sample, &grid, h, KernelKind::Epanechnikov, Centering::PerObservation).unwrap()
}
