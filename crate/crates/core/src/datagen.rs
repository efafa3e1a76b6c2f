//! Synthetic data generation and real-data ingestion.
//!
//! The synthetic model plants graph structure along mode 1: with
//! `Lap^(1) = Ubar diag(lambda_bar) Ubar^T`, the ground truth is
//! `T = [[A U^(1), U^(2), ..., U^(k)]] + E` where `A = Ubar pinv(diag)` damps
//! the high-frequency eigenvectors, the factors are i.i.d. standard normal
//! and E is i.i.d. Gaussian noise calibrated to a target SNR in dB.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{GraphAdjacency, GraphLaplacian};
use crate::tensor::{CpFactors, Shape, SparseObservations};

/// Eigenvalues below this cutoff are pseudo-inverted to zero when forming the
/// eigenvector weighting; a Laplacian always has a zero eigenvalue.
pub const EIGENVALUE_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub rank: usize,
    /// Graph on mode 1; its node count must equal m_1.
    pub graph: GraphAdjacency,
    pub snr_db: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.graph.n() != self.shape.dim(0) {
            return Err(Error::shape(format!(
                "graph has {} nodes but mode 1 has dimension {}",
                self.graph.n(),
                self.shape.dim(0)
            )));
        }
        if self.rank == 0 {
            return Err(Error::invalid("rank must be >= 1"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("SNR must be finite"));
        }
        Ok(())
    }
}

/// A generated ground-truth tensor: noise-free CP factors plus a
/// materialized noise field, addressable entry by entry.
#[derive(Debug, Clone)]
pub struct SyntheticTensor {
    factors: CpFactors,
    noise: Vec<f64>,
    shape: Shape,
    noise_sigma: f64,
}

impl SyntheticTensor {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// The noise-free CP ground truth (first factor already includes the
    /// eigenvector weighting).
    pub fn factors(&self) -> &CpFactors {
        &self.factors
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn value_at(&self, index: &[usize]) -> f64 {
        self.factors.value_at(index) + self.noise[self.shape.linear_index(index)]
    }

    pub fn noise_free_at(&self, index: &[usize]) -> f64 {
        self.factors.value_at(index)
    }

    /// 10 log10(||signal||^2 / ||E||^2) over the full tensor.
    pub fn empirical_snr_db(&self) -> f64 {
        let signal = self.factors.norm_squared();
        let noise: f64 = self.noise.iter().map(|e| e * e).sum();
        10.0 * (signal / noise).log10()
    }

    /// Observations of the noisy tensor at the given linear indices
    /// (strictly increasing).
    pub fn observe(&self, linear: &[usize]) -> Result<SparseObservations> {
        let values = linear
            .iter()
            .map(|&lin| self.factors.value_at(&self.shape.multi_index(lin)) + self.noise[lin])
            .collect();
        SparseObservations::from_linear(self.shape.clone(), linear, values)
    }

    /// The full noisy tensor as (dense) observations.
    pub fn to_dense_observations(&self) -> SparseObservations {
        let linear: Vec<usize> = (0..self.shape.num_entries()).collect();
        self.observe(&linear).expect("full index set is valid")
    }
}

/// Generates the graph-structured synthetic tensor. The noise level is
/// sigma = ||signal||_F / (sqrt(N) 10^{SNR/20}), so the SNR target holds in
/// expectation over the noise draw.
pub fn synth_graph_tensor(spec: &SyntheticSpec) -> Result<SyntheticTensor> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut factors = CpFactors::random_gaussian(&spec.shape, spec.rank, &mut rng);

    let lap = GraphLaplacian::from_adjacency(&spec.graph);
    let eig = nalgebra::SymmetricEigen::new(lap.matrix().to_dense());
    // A = Ubar pinv(diag(eigenvalues)); zero eigenvalues drop out
    let m1 = spec.shape.dim(0);
    let mut weighted = DMatrix::zeros(m1, m1);
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > EIGENVALUE_CUTOFF {
            let col = eig.eigenvectors.column(idx) / ev;
            weighted.set_column(idx, &col);
        }
    }
    let mode1 = &weighted * factors.factor(0);
    factors.set_factor(0, mode1);

    let n = spec.shape.num_entries();
    let signal_norm = factors.norm_squared().sqrt();
    let sigma = signal_norm / ((n as f64).sqrt() * 10f64.powf(spec.snr_db / 20.0));
    let noise: Vec<f64> = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(SyntheticTensor {
        factors,
        noise,
        shape: spec.shape.clone(),
        noise_sigma: sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    /// Fraction of tensor entries revealed.
    pub rate: f64,
    /// Fraction of the sampled entries assigned to the training split.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            rate: 0.1,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Uniform sampling without replacement of ceil(rate * N) entries, split
/// disjointly into train and test index sets (sorted linear indices).
pub fn sample_omega(shape: &Shape, spec: &SamplingSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = shape.num_entries();
    if !(spec.rate > 0.0 && spec.rate <= 1.0) {
        return Err(Error::invalid(format!(
            "sampling rate must be in (0, 1], got {}",
            spec.rate
        )));
    }
    if !(0.0..=1.0).contains(&spec.train_fraction) {
        return Err(Error::invalid("train fraction must be in [0, 1]"));
    }
    let total = (spec.rate * n as f64).ceil() as usize;
    if total == 0 {
        return Err(Error::invalid("sampling rate keeps no entries"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let drawn: Vec<usize> = sample(&mut rng, n, total).into_iter().collect();
    let n_train = ((total as f64) * spec.train_fraction).round() as usize;
    let mut train: Vec<usize> = drawn[..n_train].to_vec();
    let mut test: Vec<usize> = drawn[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Loads whitespace-separated `user item timestamp rating` lines into an
/// order-3 tensor, binning timestamps into `time_bins` equal-width bins over
/// the observed range. A duplicate (user, item, bin) keeps the rating with
/// the latest timestamp.
pub fn load_triples(
    path: impl AsRef<Path>,
    shape: &Shape,
    time_bins: usize,
) -> Result<SparseObservations> {
    let path = path.as_ref();
    if shape.order() != 3 {
        return Err(Error::invalid("triples load to an order-3 tensor"));
    }
    if shape.dim(2) != time_bins || time_bins == 0 {
        return Err(Error::invalid("time_bins must match the third dimension"));
    }
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut raw: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_ascii_whitespace().collect();
        if tokens.len() != 4 {
            return Err(parse_err(lineno, "expected 'user item timestamp rating'".into()));
        }
        let user: usize = tokens[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad user id '{}'", tokens[0])))?;
        let item: usize = tokens[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad item id '{}'", tokens[1])))?;
        let ts: f64 = tokens[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad timestamp '{}'", tokens[2])))?;
        let rating: f64 = tokens[3]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad rating '{}'", tokens[3])))?;
        if user == 0 || item == 0 {
            return Err(parse_err(lineno, "ids are 1-based".into()));
        }
        if user > shape.dim(0) || item > shape.dim(1) {
            return Err(Error::OutOfBounds {
                index: vec![user, item],
                dims: shape.dims().to_vec(),
            });
        }
        raw.push((user - 1, item - 1, ts, rating));
    }
    if raw.is_empty() {
        return Err(parse_err(0, "no triples found".into()));
    }
    let min_ts = raw.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let max_ts = raw.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let range = max_ts - min_ts;
    let bin_of = |ts: f64| -> usize {
        if range == 0.0 {
            0
        } else {
            (((ts - min_ts) / range * time_bins as f64) as usize).min(time_bins - 1)
        }
    };
    // latest timestamp wins per (user, item, bin)
    let mut best: std::collections::HashMap<(usize, usize, usize), (f64, f64)> =
        std::collections::HashMap::new();
    for (user, item, ts, rating) in raw {
        let key = (user, item, bin_of(ts));
        match best.get(&key) {
            Some(&(seen_ts, _)) if seen_ts >= ts => {}
            _ => {
                best.insert(key, (ts, rating));
            }
        }
    }
    let entries = best
        .into_iter()
        .map(|((u, i, b), (_, rating))| (vec![u, i, b], rating))
        .collect();
    SparseObservations::new(shape.clone(), entries)
}
