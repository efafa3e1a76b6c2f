//! Minimal CSR storage for the symmetric sparse matrices used by the
//! regularizer (adjacencies and Laplacians).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an n x n matrix from triplets; duplicate (row, col) pairs are
    /// summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(Error::invalid(format!(
                    "triplet ({r}, {c}) out of range for n = {n}"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn is_symmetric(&self) -> bool {
        self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// y += alpha * A x for dense x, y of length n.
    pub fn apply_vec_scaled(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] += alpha * acc;
        }
    }

    /// Y += alpha * A X for X, Y of size n x r (column major).
    pub fn apply_mat_scaled(&self, alpha: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        debug_assert_eq!(x.nrows(), self.n);
        debug_assert_eq!(y.nrows(), self.n);
        debug_assert_eq!(x.ncols(), y.ncols());
        for j in 0..x.ncols() {
            let xs = x.column(j);
            let mut ys = y.column_mut(j);
            for r in 0..self.n {
                let mut acc = 0.0;
                for (c, v) in self.row(r) {
                    acc += v * xs[c];
                }
                ys[r] += alpha * acc;
            }
        }
    }

    /// Y += alpha * X A for X, Y of size r x n. Valid for symmetric A only
    /// (uses X A = (A X^T)^T without transposing storage).
    pub fn apply_right_scaled_sym(&self, alpha: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        debug_assert_eq!(x.ncols(), self.n);
        debug_assert_eq!(y.ncols(), self.n);
        debug_assert_eq!(x.nrows(), y.nrows());
        // column j of Y gains alpha * sum_c A[j, c] * X[:, c]
        for j in 0..self.n {
            for (c, v) in self.row(j) {
                let src = x.column(c);
                let mut dst = y.column_mut(j);
                dst.axpy(alpha * v, &src, 1.0);
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(3, &[(0, 1, 1.0), (0, 1, 2.0), (2, 0, 4.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(2, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn apply_matches_dense() {
        let m = CsrMatrix::from_triplets(
            3,
            &[(0, 0, 2.0), (0, 2, -1.0), (1, 1, 3.0), (2, 0, -1.0), (2, 2, 5.0)],
        )
        .unwrap();
        let dense = m.to_dense();
        let x = DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        let mut y = DMatrix::zeros(3, 2);
        m.apply_mat_scaled(1.0, &x, &mut y);
        assert!((y - &dense * &x).norm() < 1e-14);

        let xt = x.transpose();
        let mut yt = DMatrix::zeros(2, 3);
        m.apply_right_scaled_sym(1.0, &xt, &mut yt);
        assert!((yt - xt * dense).norm() < 1e-14);
    }
}
