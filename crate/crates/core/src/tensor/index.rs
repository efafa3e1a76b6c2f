//! Index mapping between tensor multi-indices and mode-i matricization
//! coordinates.

use super::Shape;
use crate::error::{Error, Result};

/// Bijection between multi-indices of a tensor and (row, column) pairs of its
/// mode-i unfolding. The column index of (l_1, ..., l_k) is
/// `sum_{n != i} l_n * I_n` with `I_n = prod_{j < n, j != i} m_j`,
/// so the lowest excluded mode varies fastest.
#[derive(Debug, Clone)]
pub struct ModeIndexMap {
    mode: usize,
    shape: Shape,
    strides: Vec<usize>, // I_n per mode; stride of the mode itself is unused
}

impl ModeIndexMap {
    pub fn new(shape: &Shape, mode: usize) -> Result<Self> {
        if mode >= shape.order() {
            return Err(Error::invalid(format!(
                "mode {mode} out of range for order-{} tensor",
                shape.order()
            )));
        }
        let mut strides = vec![0; shape.order()];
        let mut acc = 1;
        for n in 0..shape.order() {
            if n == mode {
                continue;
            }
            strides[n] = acc;
            acc *= shape.dim(n);
        }
        Ok(ModeIndexMap {
            mode,
            shape: shape.clone(),
            strides,
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn n_rows(&self) -> usize {
        self.shape.dim(self.mode)
    }

    /// prod_{j != i} m_j
    pub fn n_cols(&self) -> usize {
        self.shape.num_entries() / self.shape.dim(self.mode)
    }

    /// Maps a multi-index to its (row, column) in the mode-i unfolding.
    pub fn to_pair(&self, index: &[usize]) -> Result<(usize, usize)> {
        if !self.shape.contains(index) {
            return Err(Error::OutOfBounds {
                index: index.to_vec(),
                dims: self.shape.dims().to_vec(),
            });
        }
        Ok(self.to_pair_unchecked(index))
    }

    pub(crate) fn to_pair_unchecked(&self, index: &[usize]) -> (usize, usize) {
        let mut col = 0;
        for (n, &l) in index.iter().enumerate() {
            if n != self.mode {
                col += l * self.strides[n];
            }
        }
        (index[self.mode], col)
    }

    /// Inverse of `to_pair`.
    pub fn from_pair(&self, row: usize, mut col: usize) -> Result<Vec<usize>> {
        if row >= self.n_rows() || col >= self.n_cols() {
            return Err(Error::invalid(format!(
                "unfolded index ({row}, {col}) out of range for mode {}",
                self.mode
            )));
        }
        let mut index = vec![0; self.shape.order()];
        index[self.mode] = row;
        for n in 0..self.shape.order() {
            if n == self.mode {
                continue;
            }
            index[n] = col % self.shape.dim(n);
            col /= self.shape.dim(n);
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1-based examples translated to the internal 0-based convention.
    #[test]
    fn matches_index_formula() {
        let shape = Shape::new(vec![2, 3, 4]).unwrap();
        let map = ModeIndexMap::new(&shape, 0).unwrap();
        // (2,3,4) -> (2, 12) in 1-based coordinates
        assert_eq!(map.to_pair(&[1, 2, 3]).unwrap(), (1, 11));
        assert_eq!(map.to_pair(&[0, 0, 0]).unwrap(), (0, 0));
    }

    #[test]
    fn matrix_transpose_case() {
        let shape = Shape::new(vec![5, 7]).unwrap();
        let map = ModeIndexMap::new(&shape, 1).unwrap();
        // (3,6) -> (6,3) for mode 2, 1-based
        assert_eq!(map.to_pair(&[2, 5]).unwrap(), (5, 2));
    }

    #[test]
    fn rejects_out_of_bounds() {
        let shape = Shape::new(vec![2, 3]).unwrap();
        let map = ModeIndexMap::new(&shape, 0).unwrap();
        assert!(map.to_pair(&[2, 0]).is_err());
        assert!(map.to_pair(&[0, 0, 0]).is_err());
    }

    #[test]
    fn bijective_on_small_shapes() {
        for dims in [vec![2, 3, 4], vec![3, 3], vec![2, 2, 2, 3]] {
            let shape = Shape::new(dims).unwrap();
            for mode in 0..shape.order() {
                let map = ModeIndexMap::new(&shape, mode).unwrap();
                let mut seen = vec![false; shape.num_entries()];
                for lin in 0..shape.num_entries() {
                    let idx = shape.multi_index(lin);
                    let (r, c) = map.to_pair(&idx).unwrap();
                    let flat = r * map.n_cols() + c;
                    assert!(!seen[flat]);
                    seen[flat] = true;
                    assert_eq!(map.from_pair(r, c).unwrap(), idx);
                }
            }
        }
    }
}
