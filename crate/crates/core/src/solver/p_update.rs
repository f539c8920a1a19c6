//! Row-wise closed form for the adaptive graph.
//!
//! For row `i` the subproblem is
//! `min sum_j beta V_ij P_ij + (mu + tau1) P_ij^2 - 2 tau1 P_ij P^k_ij`
//! over the probability simplex with at most `k` nonzeros, where
//! `V_ij = |W^T x_i - W^T x_j|^2`. Completing the square gives
//! `(mu + tau1) |P_i - z_i|^2` with
//! `z_ij = -beta V_ij / (2 (mu + tau1)) + tau1 / (mu + tau1) P^k_ij`,
//! so the row is the projection of `z_i` onto the k-sparse simplex: keep
//! the `k` largest `z_ij` (the `k` smallest `V_ij` when `P^k` is flat), then
//! `P_ij = max(z_ij + eta_i, 0)` with `eta_i` chosen on the active set.

use nalgebra::DMatrix;

use super::{AdaptiveGraph, BlufsConfig, ProjectionMatrix};
use crate::sparse::SparseRows;

/// Euclidean projection onto `{p >= 0, sum p = 1}`.
pub fn project_simplex(z: &[f64]) -> Vec<f64> {
    assert!(!z.is_empty(), "cannot project an empty vector onto the simplex");
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // largest active-set size whose shifted entries stay positive
    let mut cumulative = 0.0;
    let mut eta = 0.0;
    for (idx, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (1.0 - cumulative) / (idx + 1) as f64;
        if u + candidate > 0.0 {
            eta = candidate;
        }
    }
    let mut p: Vec<f64> = z.iter().map(|&v| (v + eta).max(0.0)).collect();
    // clean up rounding so the row sums to one
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        for v in &mut p {
            *v /= sum;
        }
    }
    p
}

/// Updates `P` given the current projection `W`.
///
/// Neighbor candidates are ranked by `z_ij` (ties to the lower index), which
/// makes the result the exact minimizer over rows with at most `k` entries;
/// a zero projection therefore keeps the previous neighborhoods.
pub fn update_p(prev: &AdaptiveGraph, w: &ProjectionMatrix, x: &DMatrix<f64>, cfg: &BlufsConfig) -> AdaptiveGraph {
    let n = x.ncols();
    let k = cfg.k.min(n - 1);
    let a = x.tr_mul(&w.w);
    let coef = cfg.mu + cfg.tau1;
    let keep = cfg.tau1 / coef;

    let mut rows = Vec::with_capacity(n);
    let mut z = vec![0.0; n];
    for i in 0..n {
        let ai = a.row(i);
        for (j, zj) in z.iter_mut().enumerate() {
            let v: f64 = ai
                .iter()
                .zip(a.row(j).iter())
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            *zj = -cfg.beta * v / (2.0 * coef);
        }
        for &(j, pk) in prev.p.row(i) {
            z[j] += keep * pk;
        }

        let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let order = |&p: &usize, &q: &usize| z[q].total_cmp(&z[p]).then(p.cmp(&q));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
        }
        cand.sort_unstable();

        let zs: Vec<f64> = cand.iter().map(|&j| z[j]).collect();
        let projected = project_simplex(&zs);
        rows.push(
            cand.into_iter()
                .zip(projected)
                .filter(|&(_, p)| p > 0.0)
                .collect(),
        );
    }
    AdaptiveGraph {
        p: SparseRows::from_rows(rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_basics() {
        assert_eq!(project_simplex(&[0.2, 0.2, 0.2]), vec![1.0 / 3.0; 3]);
        assert_eq!(project_simplex(&[5.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.4, -3.0]);
        assert!((p[0] - 0.55).abs() < 1e-12 && (p[1] - 0.45).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn zero_projection_gives_uniform_rows_without_proximal_pull() {
        let x = DMatrix::from_fn(3, 6, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let mut cfg = BlufsConfig::new(1, 2);
        cfg.k = 3;
        cfg.tau1 = 0.0;
        let prev = AdaptiveGraph {
            p: SparseRows::zeros(6),
        };
        let w = ProjectionMatrix::zeros(3, 2);
        let p = update_p(&prev, &w, &x, &cfg);
        for i in 0..6 {
            let row = p.p.row(i);
            assert_eq!(row.len(), 3);
            assert!(row.iter().all(|&(j, v)| j != i && (v - 1.0 / 3.0).abs() < 1e-15));
        }
        assert!(p.feasibility_violation(3).is_none());
    }
}
