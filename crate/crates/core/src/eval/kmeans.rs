use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;
const MOVE_TOL: f64 = 1e-6;

fn sq_dist(x: &DMatrix<f64>, i: usize, center: &DVector<f64>) -> f64 {
    x.column(i)
        .iter()
        .zip(center.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// k-means++ seeding: first center uniform, the rest drawn proportional to
/// the squared distance to the nearest chosen center.
fn seed_centers(x: &DMatrix<f64>, c: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = x.ncols();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(x, i, &x.column(chosen[0]).into_owned()))
        .collect();
    while chosen.len() < c {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // rounding can run past the end; fall back to the farthest point
            if nearest[pick] == 0.0 {
                pick = argmax(&nearest);
            }
            pick
        } else {
            // all remaining points coincide with centers
            (0..n).find(|i| !chosen.contains(i)).expect("c <= n")
        };
        chosen.push(next);
        let center = x.column(next).into_owned();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &center));
        }
    }
    chosen.into_iter().map(|i| x.column(i).into_owned()).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Lloyd's algorithm on the sample columns of `x` (d x n); returns cluster
/// labels in `0..c` and the final inertia.
pub fn kmeans_with_inertia(x: &DMatrix<f64>, c: usize, seed: u64) -> Result<(Vec<usize>, f64)> {
    let n = x.ncols();
    if c == 0 || c > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {c} must lie in [1, n = {n}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(x, c, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];

    for _ in 0..MAX_ITER {
        for i in 0..n {
            let mut best = (0, f64::INFINITY);
            for (k, center) in centers.iter().enumerate() {
                let d = sq_dist(x, i, center);
                if d < best.1 {
                    best = (k, d);
                }
            }
            labels[i] = best.0;
            dists[i] = best.1;
        }
        // repair empty clusters with the point farthest from its center
        let mut counts = vec![0usize; c];
        for &l in &labels {
            counts[l] += 1;
        }
        for k in 0..c {
            if counts[k] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("c <= n leaves a donor cluster");
                counts[labels[far]] -= 1;
                labels[far] = k;
                counts[k] = 1;
                dists[far] = 0.0;
            }
        }

        let mut sums = vec![DVector::zeros(x.nrows()); c];
        for i in 0..n {
            sums[labels[i]] += x.column(i);
        }
        let mut shift: f64 = 0.0;
        for k in 0..c {
            let updated = &sums[k] / counts[k] as f64;
            shift = shift.max((&updated - &centers[k]).norm());
            centers[k] = updated;
        }
        if shift < MOVE_TOL {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist(x, i, &centers[labels[i]])).sum();
    Ok((labels, inertia))
}

pub fn kmeans(x: &DMatrix<f64>, c: usize, seed: u64) -> Result<Vec<usize>> {
    kmeans_with_inertia(x, c, seed).map(|(labels, _)| labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_pairs() {
        let x = DMatrix::from_row_slice(1, 4, &[0.0, 0.1, 10.0, 10.1]);
        let labels = kmeans(&x, 2, 7).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn one_cluster_per_point() {
        let x = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 5.0, 2.0, 0.0, 3.0, 1.0, 8.0]);
        let (labels, inertia) = kmeans_with_inertia(&x, 4, 1).unwrap();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_eq!(inertia, 0.0);
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let labels = kmeans(&x, 3, 0).unwrap();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn deterministic_and_checked() {
        let x = DMatrix::from_fn(2, 30, |i, j| ((i + 3) * j % 11) as f64);
        assert_eq!(kmeans(&x, 3, 5).unwrap(), kmeans(&x, 3, 5).unwrap());
        assert!(matches!(kmeans(&x, 31, 0), Err(Error::InvalidArgument(_))));
    }
}
