//! Clustering accuracy under the best label matching, and normalized
//! mutual information.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Maximum-weight perfect matching on a square matrix (Hungarian method
/// with potentials, O(m^3)). Returns `assignment[row] = column`.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Vec<usize> {
    let m = weights.len();
    if m == 0 {
        return Vec::new();
    }
    assert!(weights.iter().all(|r| r.len() == m), "weight matrix must be square");
    let top = weights.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cost = |i: usize, j: usize| top - weights[i][j];

    // 1-based arrays; column 0 is a sentinel
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = col0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        col1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; m];
    for j in 1..=m {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

fn dense_codes(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Fraction of samples whose predicted cluster maps to their true class
/// under the optimal one-to-one matching of cluster ids to classes.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let (p, kp) = dense_codes(pred);
    let (t, kt) = dense_codes(truth);
    let m = kp.max(kt);
    let mut counts = vec![vec![0.0; m]; m];
    for (&a, &b) in p.iter().zip(&t) {
        counts[a][b] += 1.0;
    }
    let assignment = hungarian_max(&counts);
    let matched: f64 = assignment.iter().enumerate().map(|(i, &j)| counts[i][j]).sum();
    Ok(matched / pred.len() as f64)
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// `MI(a, b) / max(H(a), H(b))` with natural logarithms. Two single-cluster
/// partitions score 1; exactly one single-cluster partition scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let n = a.len() as f64;
    let (ca, ka) = dense_codes(a);
    let (cb, kb) = dense_codes(b);
    let mut joint = vec![vec![0.0; kb]; ka];
    let mut ma = vec![0.0; ka];
    let mut mb = vec![0.0; kb];
    for (&x, &y) in ca.iter().zip(&cb) {
        joint[x][y] += 1.0;
        ma[x] += 1.0;
        mb[y] += 1.0;
    }
    let ha = entropy(&ma, n);
    let hb = entropy(&mb, n);
    if ka == 1 && kb == 1 {
        return Ok(1.0);
    }
    if ka == 1 || kb == 1 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let nxy = joint[x][y];
            if nxy > 0.0 {
                mi += nxy / n * (n * nxy / (ma[x] * mb[y])).ln();
            }
        }
    }
    Ok((mi / ha.max(hb)).clamp(0.0, 1.0))
}
