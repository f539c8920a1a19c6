//! Proximal alternating minimization for the bi-level selection model
//!
//! ```text
//! min  |X^T W - Y|_F^2 + lambda |W|_F^2 - alpha Tr(Y^T S_hat Y)
//!      + beta sum_ij |W^T x_i - W^T x_j|^2 P_ij + mu |P|_F^2
//! s.t. |W|_{2,0} <= s,  P >= 0,  P 1 = 1,  Y^T Y = I
//! ```
//!
//! Each outer iteration updates `P`, then `W`, then `Y`, every block with a
//! proximal term `tau_b |B - B^k|_F^2`. The orthogonality of `Y` is handled
//! by an exact penalty over a Frobenius ball, see [`update_y`].

mod ablation;
mod init;
mod objective;
mod p_update;
mod w_update;
mod y_update;

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NormalizedAffinity, Sigma};
use crate::sparse::SparseRows;

pub use ablation::{ablation_variant, AblationCase};
pub use init::{initial_graph, spectral_labels, top_eigenvectors};
pub use objective::{label_loss, label_loss_grad, objective, penalized_label_loss};
pub use p_update::{project_simplex, update_p};
pub use w_update::{project_row_sparse, update_w, w_subproblem_value};
pub use y_update::{project_ball, update_y, InnerReport};

/// How the row-sparsity bound on `W` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    /// Project onto `|W|_{2,0} <= s` after every W-update.
    #[default]
    InLoop,
    /// Solve without the bound and keep the top-`s` rows once at the end.
    PostHoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlufsConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    /// Feature budget: at most `s` nonzero rows in `W`.
    pub s: usize,
    /// Neighbors per sample, for both the similarity graph and `P`.
    pub k: usize,
    /// Number of pseudo-label columns `c`.
    pub clusters: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub theta: f64,
    /// Frobenius-ball radius for `Y`; `None` means `sqrt(clusters)`.
    pub rho: Option<f64>,
    pub sigma: Sigma,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub seed: u64,
    /// Keep `Y` at its spectral initialization.
    pub freeze_labels: bool,
    pub sparsity: SparsityMode,
}

impl BlufsConfig {
    pub fn new(s: usize, clusters: usize) -> Self {
        Self {
            lambda: 1.0,
            alpha: 1.0,
            beta: 1.0,
            mu: 1.0,
            s,
            k: 10,
            clusters,
            tau1: 1e-2,
            tau2: 1e-2,
            tau3: 1e-2,
            theta: 1.0,
            rho: None,
            sigma: Sigma::Auto,
            outer_max_iter: 50,
            outer_tol: 1e-4,
            inner_max_iter: 100,
            inner_tol: 1e-6,
            seed: 0,
            freeze_labels: false,
            sparsity: SparsityMode::InLoop,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or((self.clusters as f64).sqrt())
    }

    /// `min(tau1, tau2, tau3)`, the sufficient-decrease constant.
    pub fn tau_min(&self) -> f64 {
        self.tau1.min(self.tau2).min(self.tau3)
    }

    /// Checks parameter ranges; `shape` is `(d, n)` when known.
    pub fn validate(&self, shape: Option<(usize, usize)>) -> Result<()> {
        let nonneg = [("lambda", self.lambda), ("alpha", self.alpha), ("beta", self.beta)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        let positive = [
            ("mu", self.mu),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("tau3", self.tau3),
            ("theta", self.theta),
            ("rho", self.rho()),
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if let Sigma::Fixed(v) = self.sigma {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("s", self.s),
            ("k", self.k),
            ("clusters", self.clusters),
            ("outer_max_iter", self.outer_max_iter),
            ("inner_max_iter", self.inner_max_iter),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if let Some((d, n)) = shape {
            if self.s > d {
                return Err(Error::InvalidArgument(format!("s = {} exceeds d = {d}", self.s)));
            }
            if self.k >= n {
                return Err(Error::InvalidArgument(format!("k = {} must be < n = {n}", self.k)));
            }
            if self.clusters > n {
                return Err(Error::InvalidArgument(format!(
                    "clusters = {} exceeds n = {n}",
                    self.clusters
                )));
            }
        }
        Ok(())
    }
}

/// Learned sample affinity: row-stochastic, at most `k` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveGraph {
    pub p: SparseRows,
}

impl AdaptiveGraph {
    /// Describes the first violated constraint, if any.
    pub fn feasibility_violation(&self, k: usize) -> Option<String> {
        for (i, row) in self.p.rows().enumerate() {
            if row.len() > k {
                return Some(format!("row {i} has {} > k = {k} entries", row.len()));
            }
            if let Some(&(j, v)) = row.iter().find(|&&(_, v)| v.is_nan() || v < 0.0) {
                return Some(format!("P[{i},{j}] = {v} is negative"));
            }
            let sum: f64 = row.iter().map(|&(_, v)| v).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Some(format!("row {i} sums to {sum}"));
            }
        }
        None
    }
}

/// Projection `W` (d x c) with its nonzero-row support.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub w: DMatrix<f64>,
    pub support: Vec<usize>,
}

impl ProjectionMatrix {
    pub fn zeros(d: usize, c: usize) -> Self {
        Self {
            w: DMatrix::zeros(d, c),
            support: Vec::new(),
        }
    }

    /// Wraps `w`, recording the rows that are not exactly zero.
    pub fn from_matrix(w: DMatrix<f64>) -> Self {
        let support = nonzero_rows(&w);
        Self { w, support }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.w.row_iter().map(|r| r.norm()).collect()
    }

    pub fn feasibility_violation(&self, s: usize) -> Option<String> {
        let nonzero = nonzero_rows(&self.w);
        if nonzero.len() > s {
            return Some(format!("{} nonzero rows exceed s = {s}", nonzero.len()));
        }
        if nonzero != self.support {
            return Some(format!(
                "recorded support {:?} differs from nonzero rows {:?}",
                self.support, nonzero
            ));
        }
        None
    }
}

pub(crate) fn nonzero_rows(w: &DMatrix<f64>) -> Vec<usize> {
    (0..w.nrows())
        .filter(|&i| w.row(i).iter().any(|&v| v != 0.0))
        .collect()
}

/// Continuous pseudo-labels `Y` (n x c).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub y: DMatrix<f64>,
}

impl PseudoLabels {
    /// `|Y^T Y - I|_F`
    pub fn orthogonality_residual(&self) -> f64 {
        let c = self.y.ncols();
        (self.y.tr_mul(&self.y) - DMatrix::identity(c, c)).norm()
    }

    pub fn feasibility_violation(&self, rho: f64) -> Option<String> {
        let norm = self.y.norm();
        if norm.is_nan() || norm > rho + 1e-9 {
            return Some(format!("|Y|_F = {norm} exceeds rho = {rho}"));
        }
        None
    }
}

/// One row of the solver trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub orthogonality: f64,
    pub step_norm: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Block {
    P,
    W,
    Y,
}

/// An outer iteration where `f(Q^{k+1}) + tau |Q^{k+1} - Q^k|^2 <= f(Q^k)`
/// failed beyond tolerance, with the blocks whose own step increased the
/// proximal objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentViolation {
    pub iter: usize,
    pub excess: f64,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub p: AdaptiveGraph,
    pub w: ProjectionMatrix,
    pub y: PseudoLabels,
    /// Completed outer iterations.
    pub iter: usize,
    /// `f(Q^0), f(Q^1), ...`
    pub objective_history: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub descent_violations: Vec<DescentViolation>,
    /// Initial orthogonality residual of `Y^0`.
    pub initial_orthogonality: f64,
}

impl SolverState {
    pub fn write_trace<W: Write>(&self, writer: W) -> Result<()> {
        write_trace(&self.trace, writer)
    }
}

/// CSV with columns `iter,f,orth_residual,step_norm,support_size`.
pub fn write_trace<W: Write>(trace: &[TraceRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["iter", "f", "orth_residual", "step_norm", "support_size"])?;
    for row in trace {
        wtr.write_record([
            row.iter.to_string(),
            row.objective.to_string(),
            row.orthogonality.to_string(),
            row.step_norm.to_string(),
            row.support_size.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<trace writer>", e))?;
    Ok(())
}

/// Relative descent tolerance used by the monitor.
pub const DESCENT_TOL: f64 = 1e-8;

/// Runs the PAM iterations from the deterministic spectral start.
pub fn run_pam(x: &DMatrix<f64>, s_hat: &NormalizedAffinity, cfg: &BlufsConfig) -> Result<SolverState> {
    run_pam_observed(x, s_hat, cfg, |_| {})
}

/// Like [`run_pam`], calling `observe` after every outer iteration.
pub fn run_pam_observed(
    x: &DMatrix<f64>,
    s_hat: &NormalizedAffinity,
    cfg: &BlufsConfig,
    mut observe: impl FnMut(&SolverState),
) -> Result<SolverState> {
    let (d, n) = x.shape();
    cfg.validate(Some((d, n)))?;
    if s_hat.dim() != n {
        return Err(Error::Dimension(format!(
            "normalized affinity is {0}x{0} but X has {n} samples",
            s_hat.dim()
        )));
    }

    let p = initial_graph(x, cfg.k, cfg.sigma)?;
    let y = spectral_labels(s_hat, cfg.clusters, cfg.rho(), cfg.seed)?;
    let w = ProjectionMatrix::zeros(d, cfg.clusters);
    let f0 = objective(&p, &w, &y, x, s_hat, cfg)?;
    let mut state = SolverState {
        initial_orthogonality: y.orthogonality_residual(),
        p,
        w,
        y,
        iter: 0,
        objective_history: vec![f0],
        trace: Vec::new(),
        converged: false,
        descent_violations: Vec::new(),
    };
    let tau = cfg.tau_min();

    for iter in 1..=cfg.outer_max_iter {
        let ctx = format!("outer iteration {iter}");
        let f_prev = *state.objective_history.last().expect("nonempty history");

        let p_new = update_p(&state.p, &state.w, x, cfg);
        let dp2 = sparse_diff_sq(&state.p.p, &p_new.p);
        let f_after_p = objective(&p_new, &state.w, &state.y, x, s_hat, cfg)?;

        let w_new = update_w(&state.w, &p_new, x, &state.y, cfg).map_err(|e| e.in_context(&ctx))?;
        let dw2 = (&w_new.w - &state.w.w).norm_squared();
        let f_after_w = objective(&p_new, &w_new, &state.y, x, s_hat, cfg)?;

        let y_new = if cfg.freeze_labels {
            state.y.clone()
        } else {
            update_y(&state.y, x, &w_new, s_hat, cfg)
                .map_err(|e| e.in_context(&ctx))?
                .0
        };
        let dy2 = (&y_new.y - &state.y.y).norm_squared();
        let f_new = objective(&p_new, &w_new, &y_new, x, s_hat, cfg)?;

        let tol = DESCENT_TOL * (1.0 + f_prev.abs());
        let excess = f_new + tau * (dp2 + dw2 + dy2) - f_prev;
        if excess > tol {
            let mut blocks = Vec::new();
            if f_after_p + cfg.tau1 * dp2 - f_prev > DESCENT_TOL * (1.0 + f_prev.abs()) {
                blocks.push(Block::P);
            }
            if f_after_w + cfg.tau2 * dw2 - f_after_p > DESCENT_TOL * (1.0 + f_after_p.abs()) {
                blocks.push(Block::W);
            }
            if f_new + cfg.tau3 * dy2 - f_after_w > DESCENT_TOL * (1.0 + f_after_w.abs()) {
                blocks.push(Block::Y);
            }
            log::warn!(
                "sufficient decrease violated at iteration {iter} by {excess:.3e} (blocks {blocks:?})"
            );
            state.descent_violations.push(DescentViolation { iter, excess, blocks });
        }

        state.p = p_new;
        state.w = w_new;
        state.y = y_new;
        state.iter = iter;
        state.objective_history.push(f_new);
        state.trace.push(TraceRow {
            iter,
            objective: f_new,
            orthogonality: state.y.orthogonality_residual(),
            step_norm: (dp2 + dw2 + dy2).sqrt(),
            support_size: state.w.support.len(),
        });
        log::debug!("iter {iter}: f = {f_new:.6e}, support = {:?}", state.w.support);
        observe(&state);

        if !f_new.is_finite() {
            return Err(Error::Numerical(format!("{ctx}: objective is not finite")));
        }
        if (f_new - f_prev).abs() / f_prev.abs().max(1.0) < cfg.outer_tol {
            state.converged = true;
            break;
        }
    }

    if cfg.sparsity == SparsityMode::PostHoc {
        state.w = project_row_sparse(&state.w.w, cfg.s);
    }
    Ok(state)
}

/// `|A - B|_F^2` for two sparse matrices of equal size.
pub(crate) fn sparse_diff_sq(a: &SparseRows, b: &SparseRows) -> f64 {
    let mut total = 0.0;
    for (ra, rb) in a.rows().zip(b.rows()) {
        let (mut i, mut j) = (0, 0);
        while i < ra.len() || j < rb.len() {
            let ca = ra.get(i).map_or(usize::MAX, |e| e.0);
            let cb = rb.get(j).map_or(usize::MAX, |e| e.0);
            let diff = match ca.cmp(&cb) {
                std::cmp::Ordering::Less => {
                    i += 1;
                    ra[i - 1].1
                }
                std::cmp::Ordering::Greater => {
                    j += 1;
                    rb[j - 1].1
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                    ra[i - 1].1 - rb[j - 1].1
                }
            };
            total += diff * diff;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = BlufsConfig::new(2, 2);
        assert!(cfg.validate(Some((5, 20))).is_ok());
        cfg.s = 6;
        let err = cfg.validate(Some((5, 20))).unwrap_err().to_string();
        assert!(err.contains("s = 6"), "{err}");
        cfg.s = 2;
        cfg.mu = 0.0;
        assert!(cfg.validate(None).unwrap_err().to_string().contains("mu"));
        cfg.mu = 1.0;
        cfg.k = 20;
        assert!(cfg.validate(Some((5, 20))).is_err());
    }

    #[test]
    fn rho_defaults_to_sqrt_c() {
        let cfg = BlufsConfig::new(1, 4);
        assert_eq!(cfg.rho(), 2.0);
    }

    #[test]
    fn sparse_difference() {
        let a = SparseRows::from_rows(vec![vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, 0.5)]]);
        let b = SparseRows::from_rows(vec![vec![(1, 1.0), (2, 1.0)], vec![(0, 3.0)], vec![(1, 0.5)]]);
        let dense = (a.to_dense() - b.to_dense()).norm_squared();
        assert!((sparse_diff_sq(&a, &b) - dense).abs() < 1e-15);
    }
}
