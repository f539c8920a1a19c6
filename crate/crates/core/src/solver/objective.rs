use nalgebra::DMatrix;

use super::{AdaptiveGraph, BlufsConfig, ProjectionMatrix, PseudoLabels};
use crate::error::{Error, Result};
use crate::graph::{laplacian_quadratic, NormalizedAffinity};

/// Value of the full model at `(P, W, Y)`. The graph term is evaluated as
/// `2 beta Tr(W^T X L_P X^T W)`.
pub fn objective(
    p: &AdaptiveGraph,
    w: &ProjectionMatrix,
    y: &PseudoLabels,
    x: &DMatrix<f64>,
    s_hat: &NormalizedAffinity,
    cfg: &BlufsConfig,
) -> Result<f64> {
    let (d, n) = x.shape();
    let c = w.w.ncols();
    if w.w.nrows() != d || y.y.shape() != (n, c) || p.p.dim() != n || s_hat.dim() != n {
        return Err(Error::Dimension(format!(
            "X {d}x{n}, W {}x{c}, Y {}x{}, P {pn}x{pn}, S_hat {sn}x{sn}",
            w.w.nrows(),
            y.y.nrows(),
            y.y.ncols(),
            pn = p.p.dim(),
            sn = s_hat.dim(),
        )));
    }
    let a = x.tr_mul(&w.w);
    let fit = (&a - &y.y).norm_squared();
    let ridge = cfg.lambda * w.w.norm_squared();
    let spectral = cfg.alpha * y.y.dot(&s_hat.s_hat.mul_dense(&y.y));
    let graph = 2.0 * cfg.beta * laplacian_quadratic(&p.p, &a);
    let reg = cfg.mu * p.p.frobenius_sq();
    Ok(fit + ridge - spectral + graph + reg)
}

/// `l(Y) = |A - Y|^2 - alpha Tr(Y^T S_hat Y) + tau3 |Y - Y^k|^2` where
/// `A = X^T W` is passed precomputed.
pub fn label_loss(
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    y_prev: &DMatrix<f64>,
    s_hat: &NormalizedAffinity,
    alpha: f64,
    tau3: f64,
) -> f64 {
    (a - y).norm_squared() - alpha * y.dot(&s_hat.s_hat.mul_dense(y))
        + tau3 * (y - y_prev).norm_squared()
}

/// Gradient of [`label_loss`]:
/// `-2(A - Y) - 2 alpha S_hat Y + 2 tau3 (Y - Y^k)`.
pub fn label_loss_grad(
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    y_prev: &DMatrix<f64>,
    s_hat: &NormalizedAffinity,
    alpha: f64,
    tau3: f64,
) -> DMatrix<f64> {
    let sy = s_hat.s_hat.mul_dense(y);
    (y - a) * 2.0 - sy * (2.0 * alpha) + (y - y_prev) * (2.0 * tau3)
}

/// Exact-penalty objective
/// `h(Y) = l(Y) - 1/2 <Lambda(Y), Y^T Y - I> + theta/4 |Y^T Y - I|^2`
/// with `Lambda(Y) = sym(Y^T grad l(Y))`.
pub fn penalized_label_loss(
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    y_prev: &DMatrix<f64>,
    s_hat: &NormalizedAffinity,
    alpha: f64,
    tau3: f64,
    theta: f64,
) -> f64 {
    let c = y.ncols();
    let grad = label_loss_grad(y, a, y_prev, s_hat, alpha, tau3);
    let lambda = multiplier(y, &grad);
    let gap = y.tr_mul(y) - DMatrix::identity(c, c);
    label_loss(y, a, y_prev, s_hat, alpha, tau3) - 0.5 * lambda.dot(&gap)
        + 0.25 * theta * gap.norm_squared()
}

/// `Lambda(Y) = (Y^T G + G^T Y) / 2`
pub(crate) fn multiplier(y: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    let m = y.tr_mul(grad);
    (&m + m.transpose()) * 0.5
}
