use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AdaptiveGraph, PseudoLabels};
use crate::error::{Error, Result};
use crate::graph::{gaussian, knn_lists, resolve_sigma, NormalizedAffinity, Sigma};
use crate::sparse::SparseRows;

/// Above this size the leading eigenvectors come from subspace iteration
/// instead of a dense decomposition.
const DENSE_EIGEN_LIMIT: usize = 1500;

/// `P^0`: each sample's own `k` nearest neighbors with Gaussian weights,
/// normalized to sum to one.
pub fn initial_graph(x: &DMatrix<f64>, k: usize, sigma: Sigma) -> Result<AdaptiveGraph> {
    let knn = knn_lists(x, k)?;
    let sigma = resolve_sigma(&knn, sigma)?;
    let rows = knn
        .iter()
        .map(|list| {
            let weights: Vec<f64> = list.iter().map(|&(_, d2)| gaussian(d2, sigma)).collect();
            let total: f64 = weights.iter().sum();
            list.iter()
                .zip(weights)
                .map(|(&(j, _), w)| (j, w / total))
                .collect()
        })
        .collect();
    Ok(AdaptiveGraph {
        p: SparseRows::from_rows(rows),
    })
}

/// Fixes the sign of each column so its largest-magnitude entry (first on
/// ties) is positive.
fn canonical_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut pivot = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
}

fn dense_top(s_hat: &SparseRows, c: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(s_hat.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    eig.eigenvectors.select_columns(&order[..c])
}

/// Orthogonal iteration on `(S_hat + I) / 2`, whose spectrum lies in [0, 1]
/// with the same eigenvectors as `S_hat`.
fn subspace_top(s_hat: &SparseRows, c: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = s_hat.dim();
    let block = (2 * c).max(c + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    q = q.qr().q();
    let mut prev_ritz = vec![f64::INFINITY; c];
    for _ in 0..5000 {
        let z = (s_hat.mul_dense(&q) + &q) * 0.5;
        q = z.qr().q();
        let small = q.tr_mul(&((s_hat.mul_dense(&q) + &q) * 0.5));
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let ritz: Vec<f64> = order[..c].iter().map(|&i| eig.eigenvalues[i]).collect();
        let done = ritz.iter().zip(&prev_ritz).all(|(a, b)| (a - b).abs() < 1e-12);
        prev_ritz = ritz;
        if done {
            return Ok(&q * eig.eigenvectors.select_columns(&order[..c]));
        }
    }
    Err(Error::Numerical(
        "subspace iteration for the spectral start did not converge".into(),
    ))
}

/// The `c` leading eigenvectors of `S_hat` (largest eigenvalues first) as
/// orthonormal columns with canonical signs.
pub fn top_eigenvectors(s_hat: &SparseRows, c: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = s_hat.dim();
    if c == 0 || c > n {
        return Err(Error::InvalidArgument(format!(
            "cannot take {c} eigenvectors of a {n}x{n} matrix"
        )));
    }
    let mut v = if n <= DENSE_EIGEN_LIMIT {
        dense_top(s_hat, c)
    } else {
        subspace_top(s_hat, c, seed)?
    };
    canonical_signs(&mut v);
    Ok(v)
}

/// `Y^0`: leading eigenvectors of `S_hat`, scaled to `|Y^0|_F = min(sqrt c, rho)`.
pub fn spectral_labels(s_hat: &NormalizedAffinity, c: usize, rho: f64, seed: u64) -> Result<PseudoLabels> {
    let v = top_eigenvectors(&s_hat.s_hat, c, seed)?;
    let root_c = (c as f64).sqrt();
    let scale = root_c.min(rho) / root_c;
    Ok(PseudoLabels { y: v * scale })
}
