//! Sparse observations P_Omega(T) in canonical COO form, with cached per-mode
//! row groupings of the unfolded index set.

use std::sync::OnceLock;

use super::{ModeIndexMap, Shape};
use crate::error::{Error, Result};

/// A set of observed tensor entries: sorted, duplicate-free COO storage.
///
/// Duplicate indices are an error on construction rather than merged; the
/// groupings Omega_s^{(i)} used by the solvers are built per mode on first
/// access and cached.
#[derive(Debug)]
pub struct SparseObservations {
    shape: Shape,
    indices: Vec<usize>, // nnz * k, lexicographically sorted tuples
    values: Vec<f64>,
    groupings: Vec<OnceLock<ModeGrouping>>,
}

impl Clone for SparseObservations {
    fn clone(&self) -> Self {
        // Cached groupings are cheap to rebuild; start fresh.
        SparseObservations {
            shape: self.shape.clone(),
            indices: self.indices.clone(),
            values: self.values.clone(),
            groupings: (0..self.shape.order()).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl SparseObservations {
    pub fn new(shape: Shape, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let k = shape.order();
        let mut keyed: Vec<(usize, Vec<usize>, f64)> = Vec::with_capacity(entries.len());
        for (idx, v) in entries {
            if !shape.contains(&idx) {
                return Err(Error::OutOfBounds {
                    index: idx,
                    dims: shape.dims().to_vec(),
                });
            }
            keyed.push((shape.linear_index(&idx), idx, v));
        }
        keyed.sort_by_key(|(lin, _, _)| *lin);
        for pair in keyed.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateEntry {
                    index: pair[1].1.clone(),
                });
            }
        }
        let mut indices = Vec::with_capacity(keyed.len() * k);
        let mut values = Vec::with_capacity(keyed.len());
        for (_, idx, v) in keyed {
            indices.extend_from_slice(&idx);
            values.push(v);
        }
        Ok(SparseObservations {
            groupings: (0..k).map(|_| OnceLock::new()).collect(),
            shape,
            indices,
            values,
        })
    }

    /// Builds from sorted, distinct linear indices (row-major). Used by the
    /// samplers, which draw linear indices directly.
    pub fn from_linear(shape: Shape, linear: &[usize], values: Vec<f64>) -> Result<Self> {
        if linear.len() != values.len() {
            return Err(Error::shape("index/value count mismatch"));
        }
        let total = shape.num_entries();
        let k = shape.order();
        let mut indices = Vec::with_capacity(linear.len() * k);
        for pair in linear.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid("linear indices must be strictly increasing"));
            }
        }
        for &lin in linear {
            if lin >= total {
                return Err(Error::invalid(format!("linear index {lin} out of range")));
            }
            indices.extend_from_slice(&shape.multi_index(lin));
        }
        Ok(SparseObservations {
            groupings: (0..k).map(|_| OnceLock::new()).collect(),
            shape,
            indices,
            values,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, pos: usize) -> &[usize] {
        let k = self.shape.order();
        &self.indices[pos * k..(pos + 1) * k]
    }

    pub fn value(&self, pos: usize) -> f64 {
        self.values[pos]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        let k = self.shape.order();
        self.indices.chunks_exact(k).zip(self.values.iter().copied())
    }

    /// Frobenius norm of the observed values.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same index set, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::shape("value count does not match index set"));
        }
        Ok(SparseObservations {
            shape: self.shape.clone(),
            indices: self.indices.clone(),
            values,
            groupings: (0..self.shape.order()).map(|_| OnceLock::new()).collect(),
        })
    }

    /// The mode-i unfolding of the index set, grouped by row. Built once and
    /// cached; concurrent first accesses race benignly inside `OnceLock`.
    pub fn mode_grouping(&self, mode: usize) -> &ModeGrouping {
        self.groupings[mode].get_or_init(|| ModeGrouping::build(self, mode))
    }
}

/// Omega^{(i)} grouped by unfolding row: for each s, the observation
/// positions with l_i = s together with their unfolded column indices.
#[derive(Debug, Clone)]
pub struct ModeGrouping {
    mode: usize,
    row_ptr: Vec<usize>, // m_i + 1
    entries: Vec<usize>, // positions into the COO arrays, sorted by (row, col)
    cols: Vec<usize>,
}

impl ModeGrouping {
    fn build(obs: &SparseObservations, mode: usize) -> Self {
        let map = ModeIndexMap::new(obs.shape(), mode).expect("mode validated by caller");
        let m = obs.shape().dim(mode);
        let mut per_row: Vec<(usize, usize, usize)> = obs
            .iter()
            .enumerate()
            .map(|(pos, (idx, _))| {
                let (r, c) = map.to_pair_unchecked(idx);
                (r, c, pos)
            })
            .collect();
        per_row.sort_unstable();
        let mut row_ptr = vec![0; m + 1];
        for &(r, _, _) in &per_row {
            row_ptr[r + 1] += 1;
        }
        for s in 0..m {
            row_ptr[s + 1] += row_ptr[s];
        }
        ModeGrouping {
            mode,
            row_ptr,
            entries: per_row.iter().map(|&(_, _, pos)| pos).collect(),
            cols: per_row.iter().map(|&(_, c, _)| c).collect(),
        }
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Observation positions and unfolded columns for row s.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let range = self.row_ptr[s]..self.row_ptr[s + 1];
        self.entries[range.clone()]
            .iter()
            .copied()
            .zip(self.cols[range].iter().copied())
    }

    pub fn row_range(&self, s: usize) -> std::ops::Range<usize> {
        self.row_ptr[s]..self.row_ptr[s + 1]
    }

    pub fn entry_positions(&self) -> &[usize] {
        &self.entries
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }
}
