//! Minimal row-compressed storage for the `n x n` sample graphs.

use nalgebra::DMatrix;

/// Square sparse matrix stored as one sorted `(column, value)` list per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn zeros(n: usize) -> Self {
        Self {
            rows: vec![Vec::new(); n],
        }
    }

    /// Builds from per-row entry lists; entries are sorted by column and
    /// explicit zeros dropped.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        for row in &mut rows {
            row.retain(|&(_, v)| v != 0.0);
            row.sort_by_key(|&(j, _)| j);
            debug_assert!(row.iter().all(|&(j, _)| j < n));
        }
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim()];
        for row in &self.rows {
            for &(j, v) in row {
                sums[j] += v;
            }
        }
        sums
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.dim()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                rows[j].push((i, v));
            }
        }
        // pushes happen in increasing i, so rows are already sorted
        Self { rows }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|&(_, v)| v * v)
            .sum()
    }

    /// `self * rhs` for a dense `n x m` right-hand side.
    pub fn mul_dense(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(rhs.nrows(), self.dim());
        let mut out = DMatrix::zeros(self.dim(), rhs.ncols());
        for col in 0..rhs.ncols() {
            let src = rhs.column(col);
            for (i, row) in self.rows.iter().enumerate() {
                let mut acc = 0.0;
                for &(j, v) in row {
                    acc += v * src[j];
                }
                out[(i, col)] = acc;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, v)| (j, f(i, j, v))).collect())
            .collect();
        Self { rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_and_product_agree_with_dense() {
        let s = SparseRows::from_rows(vec![
            vec![(2, 1.5), (1, 0.5)],
            vec![(0, 2.0)],
            vec![(2, -1.0), (0, 0.0)],
        ]);
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.get(0, 1), 0.5);
        assert_eq!(s.get(2, 0), 0.0);
        let dense = s.to_dense();
        assert_eq!(s.transpose().to_dense(), dense.transpose());
        let rhs = DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.0);
        assert_eq!(s.mul_dense(&rhs), &dense * &rhs);
        assert_eq!(s.row_sums(), vec![2.0, 2.0, -1.0]);
        assert_eq!(s.col_sums(), vec![2.0, 0.5, 0.5]);
    }
}
