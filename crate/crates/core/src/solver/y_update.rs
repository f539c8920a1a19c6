//! Y-block: exact-penalty treatment of `Y^T Y = I` solved by projected
//! Barzilai-Borwein steps on the ball `|Y|_F <= rho`.

use nalgebra::DMatrix;

use super::objective::{label_loss_grad, multiplier, penalized_label_loss};
use super::{BlufsConfig, ProjectionMatrix, PseudoLabels};
use crate::error::{Error, Result};
use crate::graph::NormalizedAffinity;

const FIRST_STEP: f64 = 1e-3;
const MIN_STEP: f64 = 1e-10;
const MAX_STEP: f64 = 1e2;

/// Scales `y` onto the ball of radius `rho` when it lies outside.
pub fn project_ball(y: DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let norm = y.norm();
    if norm > rho {
        y * (rho / norm)
    } else {
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerReport {
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective at the returned iterate.
    pub penalized: f64,
    pub direction_norm: f64,
}

/// `D(Y) = grad l(Y) - Y Lambda(Y) + theta Y (Y^T Y - I)`
fn direction(
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    y_prev: &DMatrix<f64>,
    s_hat: &NormalizedAffinity,
    cfg: &BlufsConfig,
) -> DMatrix<f64> {
    let c = y.ncols();
    let grad = label_loss_grad(y, a, y_prev, s_hat, cfg.alpha, cfg.tau3);
    let lambda = multiplier(y, &grad);
    let gap = y.tr_mul(y) - DMatrix::identity(c, c);
    &grad - y * lambda + y * gap * cfg.theta
}

/// Runs the inner exact-penalty iterations from `prev`. Returns the final
/// iterate once the direction is small enough, otherwise the iterate with the
/// lowest penalized objective.
pub fn update_y(
    prev: &PseudoLabels,
    x: &DMatrix<f64>,
    w: &ProjectionMatrix,
    s_hat: &NormalizedAffinity,
    cfg: &BlufsConfig,
) -> Result<(PseudoLabels, InnerReport)> {
    let rho = cfg.rho();
    let a = x.tr_mul(&w.w);
    let y_prev = &prev.y;
    let h = |y: &DMatrix<f64>| penalized_label_loss(y, &a, y_prev, s_hat, cfg.alpha, cfg.tau3, cfg.theta);

    let mut y = project_ball(y_prev.clone(), rho);
    let mut dir = direction(&y, &a, y_prev, s_hat, cfg);
    let mut best = (h(&y), y.clone(), dir.norm());
    let mut step = FIRST_STEP;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.inner_max_iter {
        if dir.norm() / y.norm().max(1.0) < cfg.inner_tol {
            converged = true;
            break;
        }
        let next = project_ball(&y - &dir * step, rho);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite pseudo-label iterate at inner step {iterations}"
            )));
        }
        let next_dir = direction(&next, &a, y_prev, s_hat, cfg);
        let dy = &next - &y;
        let dd = &next_dir - &dir;
        let dd2 = dd.norm_squared();
        if dd2 > 0.0 {
            step = (dy.dot(&dd).abs() / dd2).clamp(MIN_STEP, MAX_STEP);
        }
        y = next;
        dir = next_dir;
        iterations += 1;

        let value = h(&y);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite penalized objective at inner step {iterations}"
            )));
        }
        if value < best.0 {
            best = (value, y.clone(), dir.norm());
        }
    }
    if !converged && dir.norm() / y.norm().max(1.0) < cfg.inner_tol {
        converged = true;
    }
    // a stationary final iterate is kept even if an earlier one had lower h
    let (penalized, y, direction_norm) = if converged {
        (h(&y), y, dir.norm())
    } else {
        best
    };
    Ok((
        PseudoLabels { y },
        InnerReport {
            iterations,
            converged,
            penalized,
            direction_norm,
        },
    ))
}
