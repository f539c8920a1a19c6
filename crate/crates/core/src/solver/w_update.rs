//! W-block: regularized least squares with a graph penalty, then the
//! row-sparsity bound.
//!
//! With `M = X X^T + (lambda + tau2) I + 2 beta X L_P X^T` and
//! `R = X Y + tau2 W^k`, the smooth subproblem is
//! `Tr(W^T M W) - 2 Tr(W^T R) + const`, minimized by `M W = R`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{nonzero_rows, AdaptiveGraph, BlufsConfig, ProjectionMatrix, PseudoLabels, SparsityMode};
use crate::error::{Error, Result};
use crate::graph::feature_laplacian;

/// Keeps the `s` rows of largest Euclidean norm (ties to the lower index)
/// and zeroes the rest.
pub fn project_row_sparse(w: &DMatrix<f64>, s: usize) -> ProjectionMatrix {
    let keep = top_rows(w, s);
    let mut out = DMatrix::zeros(w.nrows(), w.ncols());
    for &i in &keep {
        out.set_row(i, &w.row(i));
    }
    ProjectionMatrix::from_matrix(out)
}

fn top_rows(w: &DMatrix<f64>, s: usize) -> Vec<usize> {
    let norms: Vec<f64> = w.row_iter().map(|r| r.norm()).collect();
    let mut order: Vec<usize> = (0..w.nrows()).filter(|&i| norms[i] > 0.0).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order.truncate(s);
    order.sort_unstable();
    order
}

/// `Tr(W^T M W) - 2 Tr(W^T R)`: the W-subproblem up to a constant.
pub fn w_subproblem_value(w: &DMatrix<f64>, system: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    w.dot(&(system * w)) - 2.0 * w.dot(rhs)
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    max.abs() / min.abs()
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let failure = |what: &str| {
        Error::Numerical(format!(
            "{what} in the W system (condition number ~ {:.3e})",
            condition_estimate(m)
        ))
    };
    let chol = m.clone().cholesky().ok_or_else(|| failure("Cholesky factorization failed"))?;
    let sol = chol.solve(rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(failure("non-finite solution"));
    }
    Ok(sol)
}

/// Minimizer of the subproblem with rows outside `support` fixed at zero.
fn solve_on_support(system: &DMatrix<f64>, rhs: &DMatrix<f64>, support: &[usize]) -> Result<DMatrix<f64>> {
    let mut w = DMatrix::zeros(rhs.nrows(), rhs.ncols());
    if support.is_empty() {
        return Ok(w);
    }
    let sub = system.select_rows(support).select_columns(support);
    let sol = solve_spd(&sub, &rhs.select_rows(support))?;
    for (r, &i) in support.iter().enumerate() {
        w.set_row(i, &sol.row(r));
    }
    Ok(w)
}

/// Updates `W` given the new graph `P` and the current labels `Y`.
///
/// In-loop sparsity picks the `s` largest rows of the unconstrained
/// solution and refits on that support. The refit on the previous support
/// is also evaluated and the lower subproblem value wins, so the W-step
/// never increases its proximal objective.
pub fn update_w(
    prev: &ProjectionMatrix,
    p: &AdaptiveGraph,
    x: &DMatrix<f64>,
    y: &PseudoLabels,
    cfg: &BlufsConfig,
) -> Result<ProjectionMatrix> {
    let d = x.nrows();
    let mut system = x * x.transpose();
    if cfg.beta != 0.0 {
        system += feature_laplacian(x, &p.p) * (2.0 * cfg.beta);
    }
    for i in 0..d {
        system[(i, i)] += cfg.lambda + cfg.tau2;
    }
    let rhs = x * &y.y + &prev.w * cfg.tau2;
    let full = solve_spd(&system, &rhs)?;

    if cfg.sparsity == SparsityMode::PostHoc || cfg.s >= d {
        return Ok(ProjectionMatrix::from_matrix(full));
    }

    let support = top_rows(&full, cfg.s);
    let mut best = solve_on_support(&system, &rhs, &support)?;
    if prev.support != support && prev.support.len() <= cfg.s {
        let fallback = solve_on_support(&system, &rhs, &prev.support)?;
        if w_subproblem_value(&fallback, &system, &rhs) < w_subproblem_value(&best, &system, &rhs) {
            best = fallback;
        }
    }
    debug_assert!(nonzero_rows(&best).len() <= cfg.s);
    Ok(ProjectionMatrix::from_matrix(best))
}
