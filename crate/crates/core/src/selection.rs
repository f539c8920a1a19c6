//! Feature rankings from a solved projection or from the Laplacian Score
//! baseline, and dataset reduction to the top-ranked features.

use std::io::Write;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::solver::ProjectionMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    /// One score per feature.
    pub scores: Vec<f64>,
    /// The chosen subset, best first.
    pub selected: Vec<usize>,
    /// Every rankable feature, best first; `selected` is a prefix.
    pub ranked: Vec<usize>,
}

impl FeatureRanking {
    /// CSV with columns `feature_index,feature_name,score,selected`.
    pub fn write_csv<W: Write>(&self, names: impl Fn(usize) -> String, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["feature_index", "feature_name", "score", "selected"])?;
        let mut flags = vec![false; self.scores.len()];
        for &i in &self.selected {
            flags[i] = true;
        }
        for (i, score) in self.scores.iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                names(i),
                score.to_string(),
                u8::from(flags[i]).to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<ranking writer>", e))?;
        Ok(())
    }
}

/// Ranks features by the Euclidean norm of their row in `W`; the selection
/// is exactly the nonzero rows.
pub fn feature_ranking(w: &ProjectionMatrix) -> FeatureRanking {
    let scores = w.row_norms();
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let selected: Vec<usize> = ranked.iter().copied().filter(|&i| scores[i] > 0.0).collect();
    if selected.is_empty() {
        log::warn!("projection matrix is zero; no features selected");
    }
    FeatureRanking {
        scores,
        selected,
        ranked,
    }
}

/// Laplacian Score of every feature row of `x` on the graph `S`; smaller
/// is better. Constant features score `+inf` and are never ranked.
pub fn laplacian_scores(x: &DMatrix<f64>, graph: &SimilarityGraph) -> Vec<f64> {
    let weights = &graph.weights;
    let degrees = weights.row_sums();
    let volume: f64 = degrees.iter().sum();
    x.row_iter()
        .map(|f| {
            let shift = f.iter().zip(&degrees).map(|(v, d)| v * d).sum::<f64>() / volume;
            let centered: Vec<f64> = f.iter().map(|v| v - shift).collect();
            let spread: f64 = centered.iter().zip(&degrees).map(|(v, d)| v * v * d).sum();
            // f^T L f = 1/2 sum_ij S_ij (f_i - f_j)^2
            let mut roughness = 0.0;
            for (i, row) in weights.rows().enumerate() {
                for &(j, s) in row {
                    roughness += s * (centered[i] - centered[j]).powi(2);
                }
            }
            roughness *= 0.5;
            let scale = centered.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if spread <= 1e-24 * volume.max(1.0) || scale == 0.0 {
                f64::INFINITY
            } else {
                roughness / spread
            }
        })
        .collect()
}

/// Picks the `m` features with the smallest Laplacian Score.
pub fn lapscore(x: &DMatrix<f64>, graph: &SimilarityGraph, m: usize) -> Result<FeatureRanking> {
    let d = x.nrows();
    if m == 0 || m > d {
        return Err(Error::InvalidArgument(format!("m = {m} must lie in [1, {d}]")));
    }
    let scores = laplacian_scores(x, graph);
    let mut ranked: Vec<usize> = (0..d).filter(|&i| scores[i].is_finite()).collect();
    ranked.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let selected = ranked.iter().copied().take(m).collect();
    Ok(FeatureRanking {
        scores,
        selected,
        ranked,
    })
}

/// Keeps the `m` top-ranked features in ranking order. When the selection
/// holds fewer than `m` features the next ranked ones pad it.
pub fn reduce(ds: &Dataset, ranking: &FeatureRanking, m: usize) -> Result<Dataset> {
    if m == 0 || m > ranking.ranked.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {m} features: {} are ranked",
            ranking.ranked.len()
        )));
    }
    if m > ranking.selected.len() {
        log::warn!(
            "only {} features selected; padding to {m} from the remaining ranking",
            ranking.selected.len()
        );
    }
    ds.select_features(&ranking.ranked[..m])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_similarity, Sigma};

    #[test]
    fn ranking_from_row_norms() {
        let w = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let r = feature_ranking(&ProjectionMatrix::from_matrix(w));
        assert_eq!(r.selected, vec![0, 2]);
        assert_eq!(r.scores, vec![3.0, 0.0, 2.0]);
        assert_eq!(r.ranked, vec![0, 2, 1]);

        let empty = feature_ranking(&ProjectionMatrix::zeros(3, 2));
        assert!(empty.selected.is_empty());
    }

    #[test]
    fn constant_feature_is_never_selected() {
        let x = DMatrix::from_fn(3, 12, |i, j| match i {
            0 => 4.0,
            1 => j as f64,
            _ => ((j * 7) % 5) as f64,
        });
        let g = build_similarity(&x, 3, Sigma::Auto).unwrap();
        let r = lapscore(&x, &g, 2).unwrap();
        assert!(r.scores[0].is_infinite());
        assert!(!r.selected.contains(&0));
        assert_eq!(r.ranked.len(), 2);
    }

    #[test]
    fn full_lapscore_returns_everything_ordered() {
        let x = DMatrix::from_fn(3, 10, |i, j| ((i + 1) * j) as f64 + if i == 2 { (j % 3) as f64 * 5.0 } else { 0.0 });
        let g = build_similarity(&x, 3, Sigma::Auto).unwrap();
        let r = lapscore(&x, &g, 3).unwrap();
        assert_eq!(r.selected.len(), 3);
        assert!(r.selected.windows(2).all(|p| r.scores[p[0]] <= r.scores[p[1]]));
    }

    #[test]
    fn reduce_keeps_labels_and_order() {
        let ds = Dataset::new(
            DMatrix::from_fn(4, 3, |i, j| (10 * i + j) as f64),
            Some(vec![0, 1, 0]),
            None,
            None,
        )
        .unwrap();
        let ranking = FeatureRanking {
            scores: vec![0.0, 3.0, 0.0, 2.0],
            selected: vec![1, 3],
            ranked: vec![1, 3, 0, 2],
        };
        let r = reduce(&ds, &ranking, 2).unwrap();
        assert_eq!(r.n_features(), 2);
        assert_eq!(r.labels(), ds.labels());
        assert_eq!(r.features().row(0), ds.features().row(1));
        // padding pulls the next ranked feature
        assert_eq!(reduce(&ds, &ranking, 3).unwrap().n_features(), 3);
        assert!(reduce(&ds, &ranking, 5).is_err());
    }
}
