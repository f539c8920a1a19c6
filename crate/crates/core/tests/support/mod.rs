//! Random instance generators and brute-force reference implementations
//! shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use blufs::data::Dataset;
use blufs::eval::{acc, knn_predict};
use blufs::graph::{build_similarity, laplacian_of_p, normalize_affinity, NormalizedAffinity, Sigma};
use blufs::solver::{label_loss_grad, update_p, update_w, AdaptiveGraph, BlufsConfig, ProjectionMatrix, PseudoLabels};
use blufs::sparse::SparseRows;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Row-stochastic matrix with between 1 and `k` off-diagonal entries per row.
pub fn random_stochastic(rng: &mut impl Rng, n: usize, k: usize) -> SparseRows {
    let rows = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.shuffle(rng);
            let m = rng.random_range(1..=k.min(n - 1));
            let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            others[..m].iter().zip(&weights).map(|(&j, &w)| (j, w / total)).collect()
        })
        .collect();
    SparseRows::from_rows(rows)
}

/// Normalized affinity of a k-NN graph on Gaussian points.
pub fn random_affinity(rng: &mut impl Rng, d: usize, n: usize, k: usize) -> NormalizedAffinity {
    let x = gaussian_matrix(rng, d, n);
    let graph = build_similarity(&x, k, Sigma::Auto).expect("valid graph");
    normalize_affinity(&graph).expect("no isolated vertex")
}

/// `sum_ij P_ij |W^T x_i - W^T x_j|^2` by explicit double loop.
pub fn double_sum(p: &DMatrix<f64>, x: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let n = x.ncols();
    let proj = w.transpose() * x;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += p[(i, j)] * (proj.column(i) - proj.column(j)).norm_squared();
        }
    }
    total
}

/// Euclidean simplex projection by bisection on the shift.
fn simplex_by_bisection(v: &[f64]) -> Vec<f64> {
    let mass = |eta: f64| v.iter().map(|&x| (x - eta).max(0.0)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - eta).max(0.0)).collect()
}

fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    if items.len() < size {
        return Vec::new();
    }
    let mut out = Vec::new();
    for mut rest in subsets(&items[1..], size - 1) {
        rest.insert(0, items[0]);
        out.push(rest);
    }
    out.extend(subsets(&items[1..], size));
    out
}

/// Largest per-entry gap between `update_p` and an exhaustive
/// support-enumeration + projected-gradient solve of each row.
pub fn p_update_gap(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = rng.random_range(3..=8);
    let k = rng.random_range(1..=4);
    let d = rng.random_range(1..=4);
    let c = rng.random_range(1..=3);
    let x = gaussian_matrix(&mut rng, d, n);
    let w = gaussian_matrix(&mut rng, d, c);
    let prev = random_stochastic(&mut rng, n, k);
    let mut cfg = BlufsConfig::new(d, c);
    cfg.k = k;
    cfg.beta = rng.random_range(0.1..3.0);
    cfg.mu = rng.random_range(0.1..3.0);
    cfg.tau1 = rng.random_range(0.01..1.0);

    let got = update_p(&AdaptiveGraph { p: prev.clone() }, &ProjectionMatrix::from_matrix(w.clone()), &x, &cfg)
        .p
        .to_dense();
    let prev = prev.to_dense();
    let proj = w.transpose() * &x;
    let k_eff = k.min(n - 1);
    let step = 1.0 / (2.0 * (cfg.mu + cfg.tau1));

    let mut gap: f64 = 0.0;
    for i in 0..n {
        let v: Vec<f64> = (0..n).map(|j| (proj.column(i) - proj.column(j)).norm_squared()).collect();
        let row_value = |row: &[f64]| -> f64 {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| cfg.beta * v[j] * row[j] + cfg.mu * row[j].powi(2) + cfg.tau1 * (row[j] - prev[(i, j)]).powi(2))
                .sum()
        };
        let candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for support in subsets(&candidates, k_eff) {
            let mut q = vec![1.0 / k_eff as f64; k_eff];
            for _ in 0..5000 {
                let moved: Vec<f64> = support
                    .iter()
                    .zip(&q)
                    .map(|(&j, &qj)| {
                        let grad = cfg.beta * v[j] + 2.0 * cfg.mu * qj + 2.0 * cfg.tau1 * (qj - prev[(i, j)]);
                        qj - step * grad
                    })
                    .collect();
                let next = simplex_by_bisection(&moved);
                let change: f64 = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
                q = next;
                if change < 1e-15 {
                    break;
                }
            }
            let mut row = vec![0.0; n];
            for (&j, &qj) in support.iter().zip(&q) {
                row[j] = qj;
            }
            let value = row_value(&row);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, row));
            }
        }
        let (_, row) = best.expect("at least one support");
        for j in 0..n {
            gap = gap.max((row[j] - got[(i, j)]).abs());
        }
    }
    gap
}

/// `(|grad G(W)|_F, 1e-6 (1 + |rhs|_F))` at the `update_w` output with
/// `s = d`, where the gradient of the smooth W-objective `G` is taken by
/// central differences.
pub fn w_stationarity(seed: u64) -> (f64, f64) {
    let mut rng = rng(seed);
    let d = rng.random_range(2..=6);
    let n = 8;
    let c = rng.random_range(1..=3);
    let x = gaussian_matrix(&mut rng, d, n);
    let y = gaussian_matrix(&mut rng, n, c);
    let w_prev = gaussian_matrix(&mut rng, d, c);
    let p = random_stochastic(&mut rng, n, 3);
    let mut cfg = BlufsConfig::new(d, c);
    cfg.lambda = rng.random_range(0.0..2.0);
    cfg.beta = rng.random_range(0.0..2.0);
    cfg.tau2 = rng.random_range(0.01..1.0);

    let w = update_w(
        &ProjectionMatrix::from_matrix(w_prev.clone()),
        &AdaptiveGraph { p: p.clone() },
        &x,
        &PseudoLabels { y: y.clone() },
        &cfg,
    )
    .expect("solvable system")
    .w;

    let p_dense = p.to_dense();
    let g = |w: &DMatrix<f64>| -> f64 {
        (x.transpose() * w - &y).norm_squared()
            + cfg.lambda * w.norm_squared()
            + cfg.beta * double_sum(&p_dense, &x, w)
            + cfg.tau2 * (w - &w_prev).norm_squared()
    };
    let h = 1e-5;
    let mut grad = DMatrix::zeros(d, c);
    for r in 0..d {
        for col in 0..c {
            let mut up = w.clone();
            let mut down = w.clone();
            up[(r, col)] += h;
            down[(r, col)] -= h;
            grad[(r, col)] = (g(&up) - g(&down)) / (2.0 * h);
        }
    }
    let rhs = &x * &y + &w_prev * cfg.tau2;
    (grad.norm(), 1e-6 * (1.0 + rhs.norm()))
}

/// Relative gap between `label_loss_grad` and central differences of the
/// label loss written out from its definition.
pub fn label_grad_gap(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, c) = (7, 3);
    let s_hat = random_affinity(&mut rng, 3, n, 3);
    let dense = s_hat.s_hat.to_dense();
    let a = gaussian_matrix(&mut rng, n, c);
    let y_prev = gaussian_matrix(&mut rng, n, c);
    let y = gaussian_matrix(&mut rng, n, c);
    let alpha = rng.random_range(0.0..2.0);
    let tau3 = rng.random_range(0.0..1.0);

    let l = |y: &DMatrix<f64>| -> f64 {
        (&a - y).norm_squared() - alpha * (y.transpose() * &dense * y).trace() + tau3 * (y - &y_prev).norm_squared()
    };
    let got = label_loss_grad(&y, &a, &y_prev, &s_hat, alpha, tau3);
    let h = 1e-6;
    let mut fd = DMatrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            let mut up = y.clone();
            let mut down = y.clone();
            up[(i, j)] += h;
            down[(i, j)] -= h;
            fd[(i, j)] = (l(&up) - l(&down)) / (2.0 * h);
        }
    }
    (&fd - &got).norm() / got.norm().max(1e-300)
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut tail in permutations(rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// `(acc, exhaustive maximum)` on a random 12-sample, 4-class instance.
pub fn acc_vs_permutations(seed: u64) -> (f64, f64) {
    let mut rng = rng(seed);
    let n = 12;
    let c = 4;
    let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let best = permutations((0..c).collect())
        .into_iter()
        .map(|perm| pred.iter().zip(&truth).filter(|&(&p, &t)| perm[p] == t).count())
        .max()
        .expect("nonempty");
    (acc(&pred, &truth).expect("equal lengths"), best as f64 / n as f64)
}

/// Reference k-NN: full distance table, stable sort, majority vote with
/// ties to the smallest label.
pub fn brute_knn(train: &DMatrix<f64>, labels: &[usize], test: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    (0..test.ncols())
        .map(|t| {
            let mut order: Vec<(f64, usize)> = (0..train.ncols())
                .map(|i| ((train.column(i) - test.column(t)).norm_squared(), i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; classes];
            for &(_, i) in &order[..k] {
                votes[labels[i]] += 1;
            }
            let top = *votes.iter().max().expect("nonempty");
            votes.iter().position(|&v| v == top).expect("max exists")
        })
        .collect()
}

/// Whether `knn_predict` agrees with [`brute_knn`] on a random 20-sample
/// instance with integer coordinates (so distance ties occur).
pub fn knn_matches(seed: u64) -> bool {
    let mut rng = rng(seed);
    let d = rng.random_range(1..=3);
    let (n_train, n_test) = (12, 8);
    let classes = 3;
    let grid = |rng: &mut ChaCha8Rng, cols: usize| DMatrix::from_fn(d, cols, |_, _| rng.random_range(0..4) as f64);
    let train_x = grid(&mut rng, n_train);
    let test_x = grid(&mut rng, n_test);
    let train_y: Vec<usize> = (0..n_train).map(|_| rng.random_range(0..classes)).collect();
    let test_y: Vec<usize> = (0..n_test).map(|_| rng.random_range(0..classes)).collect();
    let k = rng.random_range(1..=7);
    let train = Dataset::new(train_x.clone(), Some(train_y.clone()), Some(classes), None).expect("valid");
    let test = Dataset::new(test_x.clone(), Some(test_y), Some(classes), None).expect("valid");
    knn_predict(&train, &test, k).expect("k within train size") == brute_knn(&train_x, &train_y, &test_x, k)
}

/// `|double sum - 2 Tr(W^T X L_P X^T W)|` for a random asymmetric `P`.
pub fn trace_identity_gap(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = rng.random_range(3..=10);
    let d = rng.random_range(1..=5);
    let c = rng.random_range(1..=3);
    let x = gaussian_matrix(&mut rng, d, n);
    let w = gaussian_matrix(&mut rng, d, c);
    let p = random_stochastic(&mut rng, n, 4).to_dense();
    let trace = (w.transpose() * &x * laplacian_of_p(&p) * x.transpose() * &w).trace();
    (double_sum(&p, &x, &w) - 2.0 * trace).abs()
}

/// `max |L D^{1/2} 1|` for the normalized Laplacian of a random k-NN graph.
pub fn degree_null_gap(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = rng.random_range(6..=30);
    let k = rng.random_range(1..=5);
    let s_hat = random_affinity(&mut rng, 3, n, k);
    let root = DMatrix::from_iterator(n, 1, s_hat.degrees.iter().map(|d| d.sqrt()));
    (s_hat.laplacian() * root).amax()
}
