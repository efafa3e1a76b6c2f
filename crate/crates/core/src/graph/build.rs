//! Graph construction: Gaussian epsilon-graphs with hard thresholding, chain
//! graphs, stochastic block ("community") graphs, inverse-distance
//! adjacencies and the rank-r feature factorization used to build graphs
//! from partially observed matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::GraphAdjacency;
use crate::error::{Error, Result};

/// Distance between two rows of the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowDistance {
    /// Squared Euclidean distance.
    #[default]
    SqEuclidean,
    Euclidean,
}

impl RowDistance {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        match self {
            RowDistance::SqEuclidean => sq,
            RowDistance::Euclidean => sq.sqrt(),
        }
    }
}

fn row_slices(m: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature matrix rows".into()));
    }
    Ok((0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect())
}

/// Gaussian epsilon-graph with hard thresholding: W_ij = exp(-Z_ij / eps^2)
/// kept when the value is at least sigma, with Z the pairwise row distance.
pub fn epsilon_graph(
    features: &DMatrix<f64>,
    eps: f64,
    sigma: f64,
    distance: RowDistance,
) -> Result<GraphAdjacency> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::invalid(format!(
            "sigma must be in (0, 1], got {sigma}"
        )));
    }
    let rows = row_slices(features)?;
    let n = rows.len();
    let eps_sq = eps * eps;
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::new();
            for j in (i + 1)..n {
                let w = (-distance.eval(&rows[i], &rows[j]) / eps_sq).exp();
                if w >= sigma {
                    local.push((i, j, w));
                }
            }
            local
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        });
    GraphAdjacency::new(n, edges)
}

/// Defaults for the automatic epsilon-graph parameter choice.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonGraphParams {
    /// Preset sparsity level for the edge set, nnz(W)/n^2.
    pub target_density: f64,
    pub distance: RowDistance,
}

impl Default for EpsilonGraphParams {
    fn default() -> Self {
        EpsilonGraphParams {
            target_density: 0.05,
            distance: RowDistance::SqEuclidean,
        }
    }
}

/// Chooses eps and sigma from the data: eps^2 is the median of the nonzero
/// pairwise distances, and sigma is the smallest weight value whose threshold
/// keeps the edge density at or below the target. Returns the graph together
/// with the chosen (eps, sigma).
pub fn epsilon_graph_auto(
    features: &DMatrix<f64>,
    params: EpsilonGraphParams,
) -> Result<(GraphAdjacency, f64, f64)> {
    if !(params.target_density > 0.0 && params.target_density <= 1.0) {
        return Err(Error::invalid("target density must be in (0, 1]"));
    }
    let rows = row_slices(features)?;
    let n = rows.len();
    if n < 2 {
        return Err(Error::invalid("need at least two rows to build a graph"));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(params.distance.eval(&rows[i], &rows[j]));
        }
    }
    let mut nonzero: Vec<f64> = dists.iter().copied().filter(|&d| d > 0.0).collect();
    let eps = if nonzero.is_empty() {
        1.0
    } else {
        nonzero.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nonzero[nonzero.len() / 2].sqrt()
    };
    let eps_sq = eps * eps;
    let mut weights: Vec<f64> = dists.iter().map(|&d| (-d / eps_sq).exp()).collect();
    weights.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // density counts ordered pairs; each kept pair contributes two
    let max_pairs = ((params.target_density * (n * n) as f64) / 2.0).floor() as usize;
    // walk distinct weights in descending order; the count of pairs kept by a
    // threshold equals the end of that weight's tie group
    let sigma = {
        let mut best = None;
        let mut idx = 0;
        while idx < weights.len() {
            let d = weights[idx];
            let mut end = idx + 1;
            while end < weights.len() && weights[end] == d {
                end += 1;
            }
            if end > max_pairs {
                break;
            }
            best = Some(d);
            idx = end;
        }
        best.unwrap_or(1.0)
    };
    let sigma = sigma.clamp(f64::MIN_POSITIVE, 1.0);
    let graph = epsilon_graph(features, eps, sigma, params.distance)?;
    Ok((graph, eps, sigma))
}

/// Unit-weight path graph on n nodes.
pub fn chain_graph(n: usize) -> Result<GraphAdjacency> {
    if n < 2 {
        return Err(Error::invalid("chain graph needs at least 2 nodes"));
    }
    let edges = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    GraphAdjacency::new(n, edges)
}

/// Stochastic block model with `c` balanced contiguous communities:
/// within-community edges appear with probability p_in, cross-community
/// edges with p_out, all with unit weight. Deterministic for a fixed seed.
pub fn community_graph(
    n: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<GraphAdjacency> {
    if communities == 0 || communities > n {
        return Err(Error::invalid(format!(
            "community count {communities} invalid for {n} nodes"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::invalid(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let block = |v: usize| v * communities / n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    GraphAdjacency::new(n, edges)
}

/// Dense adjacency with W_ij = 1 / (d_ij + delta), d the Euclidean distance
/// between feature rows; delta guards identical rows.
pub fn inverse_distance_graph(features: &DMatrix<f64>) -> Result<GraphAdjacency> {
    const DELTA: f64 = 1e-8;
    let rows = row_slices(features)?;
    let n = rows.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = RowDistance::Euclidean.eval(&rows[i], &rows[j]);
            edges.push((i, j, 1.0 / (d + DELTA)));
        }
    }
    GraphAdjacency::new(n, edges)
}

/// Best-effort rank-r factorization M ~ U diag(S) V^T via the eigensystem of
/// the Gram matrix on the smaller side. Singular values below the numerical
/// floor come back as exact zeros with zeroed singular vectors.
pub fn truncated_factorization(
    m: &DMatrix<f64>,
    r: usize,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::invalid(format!(
            "rank {r} out of range for a {rows}x{cols} matrix"
        )));
    }
    let tall = rows >= cols; // eigendecompose the smaller Gram matrix
    let gram = if tall {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let scale = eig.eigenvalues[order[0]].max(0.0);
    let floor = scale * 1e-14;
    let mut s = DVector::zeros(r);
    let mut small = DMatrix::zeros(if tall { cols } else { rows }, r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        let ev = eig.eigenvalues[idx].max(0.0);
        s[k] = ev.sqrt();
        if ev > floor {
            small.set_column(k, &eig.eigenvectors.column(idx));
        } else {
            s[k] = 0.0;
        }
    }
    let other = {
        // recover the large-side singular vectors: u_k = M v_k / s_k
        let projected = if tall { m * &small } else { m.transpose() * &small };
        let mut out = projected;
        for k in 0..r {
            if s[k] > 0.0 {
                out.column_mut(k).scale_mut(1.0 / s[k]);
            } else {
                out.column_mut(k).fill(0.0);
            }
        }
        out
    };
    if tall {
        Ok((other, s, small))
    } else {
        Ok((small, s, other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_graph_edges_and_degrees() {
        assert!(chain_graph(1).is_err());
        let two = chain_graph(2).unwrap();
        assert_eq!(two.edges(), &[(0, 1, 1.0)]);
        let hundred = chain_graph(100).unwrap();
        assert_eq!(hundred.n_edges(), 99);
        let deg = hundred.degrees();
        assert_eq!(deg[0], 1);
        assert_eq!(deg[99], 1);
        assert!(deg[1..99].iter().all(|&d| d == 2));
    }

    #[test]
    fn community_graph_extremes() {
        let cliques = community_graph(4, 2, 1.0, 0.0, 1).unwrap();
        assert_eq!(cliques.edges(), &[(0, 1, 1.0), (2, 3, 1.0)]);
        let empty = community_graph(6, 3, 0.0, 0.0, 1).unwrap();
        assert_eq!(empty.n_edges(), 0);
        assert!(community_graph(4, 2, 0.3, 0.5, 1).is_err());
    }

    #[test]
    fn community_graph_edge_counts_within_3_sigma() {
        let n = 100;
        let c = 5;
        let (p_in, p_out) = (0.8, 0.01);
        let block = |v: usize| v * c / n;
        let mut intra_pairs = 0usize;
        let mut inter_pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                if block(i) == block(j) {
                    intra_pairs += 1;
                } else {
                    inter_pairs += 1;
                }
            }
        }
        let g = community_graph(n, c, p_in, p_out, 42).unwrap();
        let intra_edges = g
            .edges()
            .iter()
            .filter(|&&(i, j, _)| block(i) == block(j))
            .count();
        let inter_edges = g.n_edges() - intra_edges;
        let check = |count: usize, pairs: usize, p: f64| {
            let mean = pairs as f64 * p;
            let sd = (pairs as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (count as f64 - mean).abs() <= 3.0 * sd,
                "count {count} outside 3 sigma of binomial({pairs}, {p})"
            );
        };
        check(intra_edges, intra_pairs, p_in);
        check(inter_edges, inter_pairs, p_out);
    }

    #[test]
    fn community_graph_deterministic_per_seed() {
        let a = community_graph(50, 4, 0.5, 0.05, 7).unwrap();
        let b = community_graph(50, 4, 0.5, 0.05, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epsilon_graph_identical_rows_have_unit_weight() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 5.0, 9.0]);
        let g = epsilon_graph(&m, 1.0, 0.9, RowDistance::SqEuclidean).unwrap();
        let e01 = g.edges().iter().find(|&&(i, j, _)| (i, j) == (0, 1));
        assert_eq!(e01.map(|&(_, _, w)| w), Some(1.0));
    }

    #[test]
    fn epsilon_graph_sigma_one_keeps_only_duplicates() {
        let m = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let g = epsilon_graph(&m, 1.0, 1.0, RowDistance::SqEuclidean).unwrap();
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn epsilon_graph_separates_clusters() {
        let m = DMatrix::from_row_slice(
            4,
            2,
            &[0.0, 0.0, 0.1, 0.0, 10.0, 10.0, 10.1, 10.0],
        );
        // median pairwise distance is dominated by the cross-cluster gap
        let mut dists = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                dists.push(RowDistance::SqEuclidean.eval(
                    &m.row(i).iter().copied().collect::<Vec<_>>(),
                    &m.row(j).iter().copied().collect::<Vec<_>>(),
                ));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let eps = dists[dists.len() / 2].sqrt();
        let g = epsilon_graph(&m, eps, 0.5, RowDistance::SqEuclidean).unwrap();
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(edges, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn epsilon_graph_rejects_bad_params() {
        let m = DMatrix::zeros(2, 2);
        assert!(epsilon_graph(&m, 0.0, 0.5, RowDistance::SqEuclidean).is_err());
        assert!(epsilon_graph(&m, 1.0, 0.0, RowDistance::SqEuclidean).is_err());
        let nan = DMatrix::from_element(2, 2, f64::NAN);
        assert!(epsilon_graph(&nan, 1.0, 0.5, RowDistance::SqEuclidean).is_err());
    }

    #[test]
    fn epsilon_auto_respects_density_target() {
        let mut rng = crate::testutil::rng(17);
        let m = crate::testutil::random_matrix(20, 3, &mut rng);
        for target in [0.02, 0.05, 0.2] {
            let (g, _, _) = epsilon_graph_auto(
                &m,
                EpsilonGraphParams {
                    target_density: target,
                    distance: RowDistance::SqEuclidean,
                },
            )
            .unwrap();
            assert!(
                g.density() <= target + 1e-12,
                "density {} exceeds target {target}",
                g.density()
            );
        }
    }

    #[test]
    fn inverse_distance_graph_is_dense_and_positive() {
        let m = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let g = inverse_distance_graph(&m).unwrap();
        assert_eq!(g.n_edges(), 3);
        let w01 = g.edges().iter().find(|&&(i, j, _)| (i, j) == (0, 1)).unwrap().2;
        assert!((w01 - 1.0 / (1.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn truncated_factorization_rank1_exact() {
        let a = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = DVector::from_vec(vec![3.0, 1.0]);
        let m = &a * b.transpose();
        let (u, s, v) = truncated_factorization(&m, 1).unwrap();
        let rebuilt = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((rebuilt - &m).norm() < 1e-10);
    }

    #[test]
    fn truncated_factorization_full_rank_reproduces() {
        let mut rng = crate::testutil::rng(23);
        let m = crate::testutil::random_matrix(5, 4, &mut rng);
        let (u, s, v) = truncated_factorization(&m, 4).unwrap();
        let rebuilt = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((rebuilt - &m).norm() < 1e-9);
    }

    #[test]
    fn truncated_factorization_rejects_rank() {
        let m = DMatrix::zeros(3, 2);
        assert!(truncated_factorization(&m, 0).is_err());
        assert!(truncated_factorization(&m, 3).is_err());
    }
}
