use nalgebra::DMatrix;

use super::prisma::prisma_solve;
use super::{Penalty, PrecisionField, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::local_moments::CovarianceField;
use crate::prox_ops::group_norms;

/// Largest off-diagonal group norm `max_{u≠v} √(Σ_k Σ̂_uv(z_k)^2)`. For any
/// `λ` at or above this value the solution has no edges.
pub fn lambda_max(cov: &CovarianceField) -> f64 {
    group_norms(&cov.matrices).iter().copied().fold(0.0, f64::max)
}

/// `count` penalties log-spaced from `λ_max` down to `λ_max / 100`.
pub fn lambda_grid(cov: &CovarianceField, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidInput(format!("lambda grid needs at least 2 values, got {count}")));
    }
    let top = lambda_max(cov);
    if top <= 0.0 {
        return Err(Error::InvalidInput("covariance field has no off-diagonal signal".into()));
    }
    let (hi, lo) = (top.ln(), (top / 100.0).ln());
    let mut grid: Vec<f64> = (0..count).map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp()).collect();
    grid[0] = top;
    grid[count - 1] = top / 100.0;
    Ok(grid)
}

/// Connected components of the graph with edges `{(u, v) : √(Σ_k Σ̂_uv^2) > λ}`,
/// each sorted, ordered by smallest member.
pub fn screen_components(cov: &CovarianceField, lambda: f64) -> Result<Vec<Vec<usize>>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("screening needs lambda > 0, got {lambda}")));
    }
    let norms = group_norms(&cov.matrices);
    let p = norms.nrows();
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for u in 0..p {
        for v in (u + 1)..p {
            if norms[(u, v)] > lambda {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; p];
    for u in 0..p {
        let root = find(&mut parent, u);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(u);
    }
    Ok(groups)
}

/// Solves each screened component separately and assembles the block-diagonal
/// result. Singletons have the closed form `1 / Σ̂_uu(z_k)`.
///
/// The report's trace holds only the assembled objective; `iterations` is the
/// largest count over components and `converged` requires every component to
/// converge.
pub fn fit_prisma_screened(cov: &CovarianceField, config: &SolverConfig) -> Result<(PrecisionField, SolveReport)> {
    config.validate()?;
    let p = cov.p();
    let k = cov.grid.len();
    let components = if config.lambda > 0.0 {
        screen_components(cov, config.lambda)?
    } else {
        vec![(0..p).collect()]
    };

    let mut stack = vec![DMatrix::<f64>::zeros(p, p); k];
    let mut iterations = 0;
    let mut converged = true;
    let mut wall_time = 0.0;
    for comp in &components {
        if comp.len() == 1 {
            let u = comp[0];
            for (i, sigma) in cov.matrices.iter().enumerate() {
                let s = sigma[(u, u)];
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        index: i,
                        min_eigenvalue: s,
                    });
                }
                stack[i][(u, u)] = 1.0 / s;
            }
            continue;
        }
        let sub = cov.restrict(comp);
        let (theta, report) = prisma_solve(&sub.matrices, config, Penalty::Group)?;
        iterations = iterations.max(report.iterations);
        converged &= report.converged;
        wall_time += report.wall_time;
        for (i, t) in theta.iter().enumerate() {
            for (a, &u) in comp.iter().enumerate() {
                for (b, &v) in comp.iter().enumerate() {
                    stack[i][(u, v)] = t[(a, b)];
                }
            }
        }
    }
    let final_objective = super::ccs_objective(&stack, cov, config.lambda)?;
    let field = PrecisionField::new(cov.grid.clone(), stack, config.support_tol)?;
    let report = SolveReport {
        iterations,
        objective_trace: vec![final_objective],
        seconds_trace: vec![wall_time],
        converged,
        final_objective,
        wall_time,
    };
    Ok((field, report))
}
