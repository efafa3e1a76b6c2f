//! Graph adjacencies, Laplacians and the shifted form used by the
//! regularizer, plus the graph construction methods of the experiment
//! pipeline.

mod build;
pub mod io;
mod sparse;

pub use build::{
    chain_graph, community_graph, epsilon_graph, epsilon_graph_auto, inverse_distance_graph,
    truncated_factorization, EpsilonGraphParams, RowDistance,
};
pub use sparse::CsrMatrix;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Weighted undirected graph without self-loops: each edge stored once with
/// i < j and weight > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphAdjacency {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl GraphAdjacency {
    pub fn new(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, w) in &edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
        }
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        edges.retain(|&(_, _, w)| w > 0.0);
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for pair in edges.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateEntry {
                    index: vec![pair[1].0, pair[1].1],
                });
            }
        }
        Ok(GraphAdjacency { n, edges })
    }

    pub fn empty(n: usize) -> Self {
        GraphAdjacency { n, edges: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges (i, j, w) with i < j, each listed once.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Number of nonzeros of the symmetric weight matrix W.
    pub fn nnz(&self) -> usize {
        2 * self.edges.len()
    }

    /// Edge density |E(W)| / n^2, counting ordered pairs.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.n * self.n) as f64
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for &(i, j, w) in &self.edges {
            triplets.push((i, j, w));
            triplets.push((j, i, w));
        }
        CsrMatrix::from_triplets(self.n, &triplets).expect("edges validated")
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(i, j, _) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }
}

/// Lap = diag(W 1) - W, stored sparsely with an explicit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    n: usize,
    lap: CsrMatrix,
}

impl GraphLaplacian {
    pub fn from_adjacency(adj: &GraphAdjacency) -> Self {
        let mut deg = vec![0.0; adj.n()];
        let mut triplets = Vec::with_capacity(adj.nnz() + adj.n());
        for &(i, j, w) in adj.edges() {
            deg[i] += w;
            deg[j] += w;
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
        }
        // pattern(W) union the diagonal, even where the degree is zero
        for (i, &d) in deg.iter().enumerate() {
            triplets.push((i, i, d));
        }
        GraphLaplacian {
            n: adj.n(),
            lap: CsrMatrix::from_triplets(adj.n(), &triplets).expect("edges validated"),
        }
    }

    /// All-zero Laplacian (no graph information for the mode).
    pub fn zero(n: usize) -> Self {
        GraphLaplacian {
            n,
            lap: CsrMatrix::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.lap.nnz()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.lap
    }

    /// Lap * X.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        self.lap.apply_mat_scaled(1.0, x, &mut y);
        y
    }

    /// <F F^T, Lap> = trace(F^T Lap F), computed without forming F F^T.
    pub fn quadratic(&self, f: &DMatrix<f64>) -> Result<f64> {
        if f.nrows() != self.n {
            return Err(Error::shape(format!(
                "matrix has {} rows, Laplacian is {}x{}",
                f.nrows(),
                self.n,
                self.n
            )));
        }
        let lf = self.apply(f);
        Ok(f.iter().zip(lf.iter()).map(|(a, b)| a * b).sum())
    }
}

/// L = lambda_L * Lap + I. Positive definite for lambda_L >= 0; its smallest
/// eigenvalue is at least 1.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian<'a> {
    base: Option<&'a GraphLaplacian>,
    lambda_l: f64,
    n: usize,
}

impl<'a> ShiftedLaplacian<'a> {
    pub fn new(base: Option<&'a GraphLaplacian>, lambda_l: f64, n: usize) -> Result<Self> {
        if lambda_l < 0.0 || !lambda_l.is_finite() {
            return Err(Error::invalid(format!("lambda_L must be >= 0, got {lambda_l}")));
        }
        if let Some(lap) = base {
            if lap.n() != n {
                return Err(Error::shape(format!(
                    "Laplacian size {} does not match mode dimension {n}",
                    lap.n()
                )));
            }
        }
        Ok(ShiftedLaplacian { base, lambda_l, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }

    pub fn nnz(&self) -> usize {
        self.base.map_or(0, |l| l.nnz()) + self.n
    }

    /// (lambda_L * Lap + I) X for X with n rows.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n {
            return Err(Error::shape(format!(
                "matrix has {} rows, shifted Laplacian is {}x{}",
                x.nrows(),
                self.n,
                self.n
            )));
        }
        let mut y = x.clone();
        if let Some(lap) = self.base {
            if self.lambda_l != 0.0 {
                lap.matrix().apply_mat_scaled(self.lambda_l, x, &mut y);
            }
        }
        Ok(y)
    }

    /// (lambda_L * Lap + I) x for a vector of length n.
    pub fn apply_vec(&self, x: &nalgebra::DVector<f64>) -> Result<nalgebra::DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::shape(format!(
                "vector length {} vs shifted Laplacian size {}",
                x.len(),
                self.n
            )));
        }
        let mut y = x.clone();
        if let Some(lap) = self.base {
            if self.lambda_l != 0.0 {
                lap.matrix()
                    .apply_vec_scaled(self.lambda_l, x.as_slice(), y.as_mut_slice());
            }
        }
        Ok(y)
    }

    /// Y += alpha * X L for X, Y of size r x n (right-multiplication).
    pub fn apply_right_scaled(&self, alpha: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        // identity part
        y.zip_apply(x, |yv, xv| *yv += alpha * xv);
        if let Some(lap) = self.base {
            if self.lambda_l != 0.0 {
                lap.matrix()
                    .apply_right_scaled_sym(alpha * self.lambda_l, x, y);
            }
        }
    }

    /// <F F^T, L> = lambda_L <F F^T, Lap> + ||F||_F^2.
    pub fn quadratic(&self, f: &DMatrix<f64>) -> Result<f64> {
        let base = match self.base {
            Some(lap) if self.lambda_l != 0.0 => self.lambda_l * lap.quadratic(f)?,
            _ => 0.0,
        };
        Ok(base + f.norm_squared())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.n, self.n);
        if let Some(lap) = self.base {
            m += lap.matrix().to_dense() * self.lambda_l;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    pub(crate) fn path3() -> GraphAdjacency {
        GraphAdjacency::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn path_laplacian_matches_hand_computation() {
        let lap = GraphLaplacian::from_adjacency(&path3());
        let expect = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0],
        );
        assert_eq!(lap.matrix().to_dense(), expect);
    }

    #[test]
    fn empty_graph_gives_zero_laplacian() {
        let lap = GraphLaplacian::from_adjacency(&GraphAdjacency::empty(4));
        assert_eq!(lap.matrix().to_dense(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn complete_k3_laplacian() {
        let adj =
            GraphAdjacency::new(3, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let lap = GraphLaplacian::from_adjacency(&adj);
        let ones = DMatrix::from_element(3, 3, 1.0);
        let expect = DMatrix::identity(3, 3) * 2.0 - (ones - DMatrix::identity(3, 3));
        assert_eq!(lap.matrix().to_dense(), expect);
    }

    #[test]
    fn adjacency_rejects_bad_input() {
        assert!(GraphAdjacency::new(3, vec![(0, 0, 1.0)]).is_err());
        assert!(GraphAdjacency::new(3, vec![(0, 3, 1.0)]).is_err());
        assert!(GraphAdjacency::new(3, vec![(0, 1, -1.0)]).is_err());
        assert!(GraphAdjacency::new(3, vec![(0, 1, 1.0), (1, 0, 1.0)]).is_err());
    }

    #[test]
    fn quadratic_vanishes_on_constants() {
        let lap = GraphLaplacian::from_adjacency(&path3());
        let f = DMatrix::from_element(3, 2, 3.5);
        assert!(lap.quadratic(&f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn quadratic_e1_is_first_diagonal() {
        let lap = GraphLaplacian::from_adjacency(&path3());
        let f = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!((lap.quadratic(&f).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_identity_when_lambda_zero_and_annihilates_constants() {
        let lap = GraphLaplacian::from_adjacency(&path3());
        let x = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let l0 = ShiftedLaplacian::new(Some(&lap), 0.0, 3).unwrap();
        assert_eq!(l0.apply(&x).unwrap(), x);

        let l1 = ShiftedLaplacian::new(Some(&lap), 1.0, 3).unwrap();
        let ones = DMatrix::from_element(3, 1, 1.0);
        assert!((l1.apply(&ones).unwrap() - &ones).norm() < 1e-14);
    }

    #[test]
    fn shifted_right_apply_matches_dense() {
        let lap = GraphLaplacian::from_adjacency(&path3());
        let shifted = ShiftedLaplacian::new(Some(&lap), 0.7, 3).unwrap();
        let x = DMatrix::from_fn(2, 3, |i, j| (2 * i + j) as f64 - 1.0);
        let mut y = DMatrix::zeros(2, 3);
        shifted.apply_right_scaled(2.0, &x, &mut y);
        let expect = &x * shifted.to_dense() * 2.0;
        assert!((y - expect).norm() < 1e-13);
        let _ = DVector::<f64>::zeros(1);
    }
}
