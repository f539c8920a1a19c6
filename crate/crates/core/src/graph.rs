//! k-NN Gaussian similarity graphs, their symmetric normalization, and the
//! Laplacian of a learned (possibly asymmetric) affinity matrix.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseRows;

/// Kernel bandwidth choice for [`build_similarity`]. Serialized as the
/// string `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sigma {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Sigma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => s.serialize_str("auto"),
            Sigma::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct SigmaVisitor;

        impl serde::de::Visitor<'_> for SigmaVisitor {
            type Value = Sigma;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("\"auto\" or a positive number")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Sigma, E> {
                if v == "auto" {
                    Ok(Sigma::Auto)
                } else {
                    Err(E::invalid_value(serde::de::Unexpected::Str(v), &self))
                }
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Fixed(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Fixed(v as f64))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Fixed(v as f64))
            }
        }

        d.deserialize_any(SigmaVisitor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub weights: SparseRows,
    pub k: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAffinity {
    /// `D^{-1/2} S D^{-1/2}`
    pub s_hat: SparseRows,
    pub degrees: Vec<f64>,
}

impl NormalizedAffinity {
    /// Dense normalized Laplacian `I - S_hat`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.s_hat.dim();
        DMatrix::identity(n, n) - self.s_hat.to_dense()
    }

    pub fn dim(&self) -> usize {
        self.s_hat.dim()
    }
}

fn sq_dist(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    x.column(i)
        .iter()
        .zip(x.column(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Squared Euclidean distances between all sample columns.
pub fn pairwise_sq_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(x, i, j);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// For every sample, the `k` nearest other samples as `(index, squared
/// distance)`, nearest first; distance ties go to the lower index.
pub fn knn_lists(x: &DMatrix<f64>, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = x.ncols();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 0 < k < n, got k = {k}, n = {n}"
        )));
    }
    let dist = pairwise_sq_distances(x);
    Ok((0..n)
        .map(|i| {
            let mut cand: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, dist[(i, j)])).collect();
            cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            cand.truncate(k);
            cand
        })
        .collect())
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        return 0.0;
    }
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Resolves the kernel bandwidth from the k-NN lists.
pub fn resolve_sigma(knn: &[Vec<(usize, f64)>], sigma: Sigma) -> Result<f64> {
    match sigma {
        Sigma::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
        Sigma::Fixed(s) => Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {s}"
        ))),
        Sigma::Auto => {
            let dists = knn.iter().flat_map(|r| r.iter().map(|&(_, d2)| d2.sqrt())).collect();
            let m = median(dists);
            if m > 0.0 {
                Ok(m)
            } else {
                log::warn!("median k-NN distance is zero (duplicate samples); using sigma = 1");
                Ok(1.0)
            }
        }
    }
}

/// Symmetric k-NN Gaussian affinity: `S_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))`
/// when either sample is among the other's `k` nearest, else 0. Self
/// loops are excluded.
pub fn build_similarity(x: &DMatrix<f64>, k: usize, sigma: Sigma) -> Result<SimilarityGraph> {
    let knn = knn_lists(x, k)?;
    let sigma = resolve_sigma(&knn, sigma)?;
    Ok(similarity_from_knn(&knn, k, sigma))
}

pub(crate) fn gaussian(d2: f64, sigma: f64) -> f64 {
    // underflow would silently drop an edge that the neighbor rule keeps
    (-d2 / (2.0 * sigma * sigma)).exp().max(f64::MIN_POSITIVE)
}

fn similarity_from_knn(knn: &[Vec<(usize, f64)>], k: usize, sigma: f64) -> SimilarityGraph {
    let n = knn.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, list) in knn.iter().enumerate() {
        for &(j, d2) in list {
            let w = gaussian(d2, sigma);
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
    }
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
        row.dedup_by_key(|&mut (j, _)| j);
    }
    SimilarityGraph {
        weights: SparseRows::from_rows(rows),
        k,
        sigma,
    }
}

/// `S_hat = D^{-1/2} S D^{-1/2}` with `D_ii = sum_j S_ij`.
pub fn normalize_affinity(graph: &SimilarityGraph) -> Result<NormalizedAffinity> {
    let degrees = graph.weights.row_sums();
    if let Some(vertex) = degrees.iter().position(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::IsolatedVertex { vertex });
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let s_hat = graph
        .weights
        .map_values(|i, j, v| v * inv_sqrt[i] * inv_sqrt[j]);
    Ok(NormalizedAffinity { s_hat, degrees })
}

/// Degrees used by [`laplacian_of_p`]: row sums of `(P + P^T) / 2`.
pub fn symmetric_degrees(p: &SparseRows) -> Vec<f64> {
    p.row_sums()
        .into_iter()
        .zip(p.col_sums())
        .map(|(r, c)| 0.5 * (r + c))
        .collect()
}

/// `L_P = D_P - (P + P^T)/2` where `D_P` holds the row sums of the
/// symmetrized affinity. This makes
/// `sum_ij |W^T x_i - W^T x_j|^2 P_ij = 2 Tr(W^T X L_P X^T W)` hold for
/// asymmetric `P`; for symmetric `P` the degrees are plain row sums.
pub fn laplacian_of_p(p: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(p.is_square(), "P must be square");
    let n = p.nrows();
    let sym = (p + p.transpose()) * 0.5;
    let mut lap = -sym.clone();
    for i in 0..n {
        lap[(i, i)] += sym.row(i).sum();
    }
    lap
}

/// `Tr(A^T L_P A)` for sparse `P` without materializing `L_P`.
pub fn laplacian_quadratic(p: &SparseRows, a: &DMatrix<f64>) -> f64 {
    // Tr(A^T L A) = 1/2 sum_ij P_ij |a_i - a_j|^2
    let mut total = 0.0;
    for (i, row) in p.rows().enumerate() {
        for &(j, v) in row {
            let d2: f64 = a
                .row(i)
                .iter()
                .zip(a.row(j).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            total += v * d2;
        }
    }
    0.5 * total
}

/// `X L_P X^T` (d x d) for sparse `P`.
pub fn feature_laplacian(x: &DMatrix<f64>, p: &SparseRows) -> DMatrix<f64> {
    let deg = symmetric_degrees(p);
    let pt = p.transpose();
    let xt = x.transpose();
    // L_P X^T = D X^T - (P X^T + P^T X^T)/2
    let mut lx = (p.mul_dense(&xt) + pt.mul_dense(&xt)) * -0.5;
    for (i, &d) in deg.iter().enumerate() {
        let mut row = lx.row_mut(i);
        row += xt.row(i) * d;
    }
    let mut out = x * lx;
    // symmetric in exact arithmetic; remove rounding asymmetry before Cholesky
    let sym = (&out + out.transpose()) * 0.5;
    out.copy_from(&sym);
    out
}

/// Writes `(i, j, value)` triplets for the nonzero entries.
pub fn write_triplets<W: Write>(weights: &SparseRows, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["i", "j", "value"])?;
    for (i, row) in weights.rows().enumerate() {
        for &(j, v) in row {
            wtr.write_record([i.to_string(), j.to_string(), v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<triplet writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(cols: &[[f64; 2]]) -> DMatrix<f64> {
        DMatrix::from_fn(2, cols.len(), |i, j| cols[j][i])
    }

    #[test]
    fn duplicates_have_unit_similarity() {
        let x = points(&[[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [9.0, 1.0]]);
        let g = build_similarity(&x, 1, Sigma::Fixed(1.0)).unwrap();
        assert_eq!(g.weights.get(0, 1), 1.0);
        assert_eq!(g.weights.get(1, 0), 1.0);
    }

    #[test]
    fn non_neighbors_are_zero_and_graph_is_symmetric() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0], [30.0, 0.0]]);
        let g = build_similarity(&x, 1, Sigma::Fixed(2.0)).unwrap();
        assert_eq!(g.weights.get(0, 3), 0.0);
        assert_eq!(g.weights.get(1, 2), 0.0);
        // 4's nearest is 3, so the pair survives through the union rule
        assert!(g.weights.get(3, 4) > 0.0);
        let dense = g.weights.to_dense();
        assert_eq!(dense, dense.transpose());
        assert!((0..5).all(|i| dense[(i, i)] == 0.0));
    }

    #[test]
    fn k_must_be_below_n() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(matches!(build_similarity(&x, 3, Sigma::Auto), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_similarity(&x, 0, Sigma::Auto), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn auto_sigma_is_median_neighbor_distance() {
        let x = points(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let g = build_similarity(&x, 1, Sigma::Auto).unwrap();
        // neighbor distances 1, 1, 2
        assert_eq!(g.sigma, 1.0);

        let dup = points(&[[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]]);
        assert_eq!(build_similarity(&dup, 1, Sigma::Auto).unwrap().sigma, 1.0);
    }

    #[test]
    fn two_cycle_normalizes_to_itself() {
        let g = SimilarityGraph {
            weights: SparseRows::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]]),
            k: 1,
            sigma: 1.0,
        };
        let norm = normalize_affinity(&g).unwrap();
        assert_eq!(norm.s_hat, g.weights);
        assert_eq!(norm.degrees, vec![1.0, 1.0]);
    }

    #[test]
    fn isolated_vertex_is_reported() {
        let g = SimilarityGraph {
            weights: SparseRows::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![]]),
            k: 1,
            sigma: 1.0,
        };
        assert!(matches!(normalize_affinity(&g), Err(Error::IsolatedVertex { vertex: 2 })));
    }

    #[test]
    fn laplacian_small_cases() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(
            laplacian_of_p(&p),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
        assert_eq!(laplacian_of_p(&DMatrix::zeros(3, 3)), DMatrix::zeros(3, 3));
    }

    #[test]
    fn sparse_feature_laplacian_matches_dense() {
        let p = SparseRows::from_rows(vec![
            vec![(1, 0.7), (2, 0.3)],
            vec![(0, 1.0)],
            vec![(0, 0.4), (1, 0.6)],
        ]);
        let x = DMatrix::from_fn(2, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5).powi(2) + i as f64);
        let dense = &x * laplacian_of_p(&p.to_dense()) * x.transpose();
        assert!((feature_laplacian(&x, &p) - dense).amax() < 1e-12);
    }

    #[test]
    fn triplets_roundtrip_shape() {
        let g = SimilarityGraph {
            weights: SparseRows::from_rows(vec![vec![(1, 0.5)], vec![(0, 0.5)]]),
            k: 1,
            sigma: 1.0,
        };
        let mut buf = Vec::new();
        write_triplets(&g.weights, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j,value\n0,1,0.5\n1,0,0.5\n");
    }

    #[test]
    fn sigma_serde() {
        assert_eq!(serde_json::from_str::<Sigma>("\"auto\"").unwrap(), Sigma::Auto);
        assert_eq!(serde_json::from_str::<Sigma>("2.5").unwrap(), Sigma::Fixed(2.5));
        assert_eq!(serde_json::from_str::<Sigma>("2").unwrap(), Sigma::Fixed(2.0));
        assert!(serde_json::from_str::<Sigma>("\"wide\"").is_err());
        assert_eq!(serde_json::to_string(&Sigma::Auto).unwrap(), "\"auto\"");
    }
}
