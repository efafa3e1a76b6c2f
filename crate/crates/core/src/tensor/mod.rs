//! Tensor primitives: shapes, sparse observations in COO form, CP factors,
//! matricization index math and Khatri-Rao/Kronecker products.
//!
//! Indices are 0-based everywhere inside the library; the 1-based convention
//! of the file formats is translated at the I/O boundary only.

mod cp;
mod index;
pub mod io;
mod products;
mod sparse;

pub use cp::{residual_on_omega, CpFactors};
pub use index::ModeIndexMap;
pub use products::{
    khatri_rao, khatri_rao_col_norms_sq, khatri_rao_excluding, kr_row_excluding, kronecker,
};
pub use sparse::{ModeGrouping, SparseObservations};

use crate::error::{Error, Result};

/// Dimensions (m_1, ..., m_k) of an order-k tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    /// Requires k >= 2, every dimension >= 1 and a total element count that
    /// fits in `usize`.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid(format!(
                "tensor order must be at least 2, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&m| m == 0) {
            return Err(Error::invalid(format!("zero dimension in shape {dims:?}")));
        }
        let mut total: usize = 1;
        for &m in &dims {
            total = total
                .checked_mul(m)
                .ok_or_else(|| Error::invalid(format!("shape {dims:?} overflows usize")))?;
        }
        Ok(Shape { dims })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Total number of entries.
    pub fn num_entries(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        index.len() == self.dims.len() && index.iter().zip(&self.dims).all(|(&l, &m)| l < m)
    }

    /// Row-major linear index (last mode fastest). Monotone in the
    /// lexicographic order of multi-indices.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert!(self.contains(index));
        let mut lin = 0;
        for (l, m) in index.iter().zip(&self.dims) {
            lin = lin * m + l;
        }
        lin
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order()];
        for (slot, &m) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = linear % m;
            linear /= m;
        }
        idx
    }
}
