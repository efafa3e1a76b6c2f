//! CP-format factors and pointwise reconstruction.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Shape, SparseObservations};
use crate::error::{Error, Result};

/// Factor matrices U^{(1)}, ..., U^{(k)} of a rank-R CP representation;
/// factor i has size m_i x R.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    factors: Vec<DMatrix<f64>>,
}

impl CpFactors {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::invalid("CP factors need at least two modes"));
        }
        let rank = factors[0].ncols();
        if rank == 0 {
            return Err(Error::invalid("CP rank must be at least 1"));
        }
        if factors.iter().any(|f| f.ncols() != rank) {
            return Err(Error::shape("CP factors must share a column count"));
        }
        if factors.iter().any(|f| f.nrows() == 0) {
            return Err(Error::shape("CP factor with zero rows"));
        }
        Ok(CpFactors { factors })
    }

    /// Factors with i.i.d. standard normal entries.
    pub fn random_gaussian<R: Rng + ?Sized>(shape: &Shape, rank: usize, rng: &mut R) -> Self {
        let factors = shape
            .dims()
            .iter()
            .map(|&m| DMatrix::from_fn(m, rank, |_, _| rng.sample(StandardNormal)))
            .collect();
        CpFactors { factors }
    }

    pub fn zeros(shape: &Shape, rank: usize) -> Self {
        let factors = shape
            .dims()
            .iter()
            .map(|&m| DMatrix::zeros(m, rank))
            .collect();
        CpFactors { factors }
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|f| f.nrows()).collect())
            .expect("factor rows form a valid shape")
    }

    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        &self.factors[mode]
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn set_factor(&mut self, mode: usize, factor: DMatrix<f64>) {
        debug_assert_eq!(factor.ncols(), self.rank());
        debug_assert_eq!(factor.nrows(), self.factors[mode].nrows());
        self.factors[mode] = factor;
    }

    /// Entry of the represented tensor: sum_r prod_i U^{(i)}[l_i, r].
    pub fn value_at(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.order());
        let rank = self.rank();
        let mut acc = 0.0;
        for r in 0..rank {
            let mut term = 1.0;
            for (factor, &l) in self.factors.iter().zip(index) {
                term *= factor[(l, r)];
            }
            acc += term;
        }
        acc
    }

    /// Squared Frobenius norm of the represented tensor, via the Gram trick
    /// ||[[U]]||^2 = 1^T (hadamard_i U^{(i)T} U^{(i)}) 1.
    pub fn norm_squared(&self) -> f64 {
        let rank = self.rank();
        let mut gram = DMatrix::from_element(rank, rank, 1.0);
        for f in &self.factors {
            gram.component_mul_assign(&(f.transpose() * f));
        }
        gram.sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.factors
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// P_Omega(T - [[U]]): the observed values minus the CP reconstruction on the
/// same index set.
pub fn residual_on_omega(factors: &CpFactors, obs: &SparseObservations) -> Result<SparseObservations> {
    if factors.shape() != *obs.shape() {
        return Err(Error::shape(format!(
            "factors shape {:?} vs observations shape {:?}",
            factors.shape().dims(),
            obs.shape().dims()
        )));
    }
    let values = obs
        .iter()
        .map(|(idx, v)| v - factors.value_at(idx))
        .collect();
    obs.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn rank1_value() {
        let u = DMatrix::from_vec(2, 1, vec![1.0, 2.0]);
        let v = DMatrix::from_vec(2, 1, vec![3.0, 4.0]);
        let f = CpFactors::new(vec![u, v]).unwrap();
        // (2,1) in 1-based coordinates
        assert_eq!(f.value_at(&[1, 0]), 6.0);
    }

    #[test]
    fn zero_column_contributes_nothing() {
        let mut rng = crate::testutil::rng(5);
        let shape = Shape::new(vec![3, 4]).unwrap();
        let mut f = CpFactors::random_gaussian(&shape, 2, &mut rng);
        let mut u0 = f.factor(0).clone();
        u0.set_column(1, &DVector::zeros(3));
        f.set_factor(0, u0);
        let g = CpFactors::new(vec![
            f.factor(0).columns(0, 1).into_owned(),
            f.factor(1).columns(0, 1).into_owned(),
        ])
        .unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert!((f.value_at(&[i, j]) - g.value_at(&[i, j])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn residual_zero_for_exact_fit_and_equals_obs_for_zero_factors() {
        let mut rng = crate::testutil::rng(9);
        let shape = Shape::new(vec![3, 3, 3]).unwrap();
        let f = CpFactors::random_gaussian(&shape, 2, &mut rng);
        let entries = (0..shape.num_entries())
            .step_by(3)
            .map(|lin| {
                let idx = shape.multi_index(lin);
                let v = f.value_at(&idx);
                (idx, v)
            })
            .collect();
        let obs = SparseObservations::new(shape.clone(), entries).unwrap();
        let res = residual_on_omega(&f, &obs).unwrap();
        assert!(res.norm() < 1e-12);

        let zero = CpFactors::zeros(&shape, 2);
        let res0 = residual_on_omega(&zero, &obs).unwrap();
        assert_eq!(res0.values(), obs.values());
    }

    #[test]
    fn residual_rejects_shape_mismatch() {
        let shape = Shape::new(vec![3, 3]).unwrap();
        let other = Shape::new(vec![3, 4]).unwrap();
        let f = CpFactors::zeros(&shape, 1);
        let obs = SparseObservations::new(other, vec![(vec![0, 0], 1.0)]).unwrap();
        assert!(residual_on_omega(&f, &obs).is_err());
    }

    #[test]
    fn norm_squared_matches_dense() {
        let mut rng = crate::testutil::rng(13);
        let shape = Shape::new(vec![3, 4, 2]).unwrap();
        let f = CpFactors::random_gaussian(&shape, 3, &mut rng);
        let dense: f64 = (0..shape.num_entries())
            .map(|lin| {
                let v = f.value_at(&shape.multi_index(lin));
                v * v
            })
            .sum();
        assert!((f.norm_squared() - dense).abs() < 1e-9 * dense.max(1.0));
    }
}
