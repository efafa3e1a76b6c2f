//! Linear conjugate gradient on an abstract symmetric positive definite
//! operator.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Symmetric positive definite linear map, applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
}

impl LinearOperator for crate::subproblem::SubproblemOperator<'_> {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply_vec(x)
    }
}

/// Dense operator wrapper, mostly for tests and reference solves.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub nalgebra::DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.0 * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgConfig {
    /// Relative residual target: stop once ||r_t|| <= rel_tol * ||r_0||.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            rel_tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("CG rel_tol must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("CG max_iters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iters: usize,
    /// ||rhs - M x|| at exit.
    pub final_residual: f64,
}

/// Conjugate gradient with the residual-ratio update
/// `beta = ||r_t||^2 / ||r_{t-1}||^2`, stopping once
/// `||r_t|| <= rel_tol * ||r_0||` or the iteration budget runs out.
///
/// Non-finite intermediates (a symptom of an indefinite or singular
/// operator) abort with an error.
pub fn linear_cg<Op: LinearOperator + ?Sized>(
    op: &Op,
    rhs: &DVector<f64>,
    x0: &DVector<f64>,
    cfg: &CgConfig,
) -> Result<CgOutcome> {
    cfg.validate()?;
    if rhs.len() != op.dim() || x0.len() != op.dim() {
        return Err(Error::shape(format!(
            "operator dim {} vs rhs {} / x0 {}",
            op.dim(),
            rhs.len(),
            x0.len()
        )));
    }
    let mut x = x0.clone();
    let mut r = rhs - op.apply(&x)?;
    let mut rs = r.norm_squared();
    if !rs.is_finite() {
        return Err(Error::NonFinite("CG initial residual".into()));
    }
    let threshold = cfg.rel_tol * rs.sqrt();
    let mut rs_old = rs;
    let mut p = DVector::zeros(op.dim());
    let mut iters = 0;
    for t in 0..cfg.max_iters {
        if rs.sqrt() <= threshold {
            break;
        }
        if t == 0 {
            p.copy_from(&r);
        } else {
            let beta = rs / rs_old;
            p *= beta;
            p += &r;
        }
        let v = op.apply(&p)?;
        let alpha = rs / p.dot(&v);
        if !alpha.is_finite() {
            return Err(Error::NonFinite("CG step size".into()));
        }
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &v, 1.0);
        rs_old = rs;
        rs = r.norm_squared();
        if !rs.is_finite() {
            return Err(Error::NonFinite("CG residual".into()));
        }
        iters = t + 1;
    }
    Ok(CgOutcome {
        x,
        iters,
        final_residual: rs.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identity_converges_in_one_iteration() {
        let op = DenseOperator(DMatrix::identity(4, 4));
        let rhs = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let out = linear_cg(&op, &rhs, &DVector::zeros(4), &CgConfig::default()).unwrap();
        assert_eq!(out.iters, 1);
        assert!((out.x - rhs).norm() < 1e-14);
    }

    #[test]
    fn two_distinct_eigenvalues_terminate_in_two_iterations() {
        let op = DenseOperator(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])));
        let rhs = DVector::from_vec(vec![2.0, 3.0]);
        let out = linear_cg(&op, &rhs, &DVector::zeros(2), &CgConfig::default()).unwrap();
        assert!(out.iters <= 2);
        assert!((out.x - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn already_converged_start_does_no_work() {
        let op = DenseOperator(DMatrix::identity(3, 3));
        let rhs = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let out = linear_cg(&op, &rhs, &rhs, &CgConfig::default()).unwrap();
        assert_eq!(out.iters, 0);
        assert_eq!(out.final_residual, 0.0);
    }

    #[test]
    fn random_spd_matches_direct_solve() {
        let mut rng = crate::testutil::rng(41);
        let a = crate::testutil::random_matrix(30, 30, &mut rng);
        let spd = &a * a.transpose() + DMatrix::identity(30, 30) * 0.5;
        let rhs = crate::testutil::random_matrix(30, 1, &mut rng).column(0).into_owned();
        let direct = spd.clone().cholesky().unwrap().solve(&rhs);
        let cfg = CgConfig {
            rel_tol: 1e-12,
            max_iters: 200,
        };
        let out = linear_cg(&DenseOperator(spd), &rhs, &DVector::zeros(30), &cfg).unwrap();
        assert!((out.x - direct).norm() / direct.norm() < 1e-6);
    }

    #[test]
    fn rejects_bad_config_and_dimension() {
        let op = DenseOperator(DMatrix::identity(2, 2));
        let rhs = DVector::zeros(2);
        let bad = CgConfig {
            rel_tol: 0.0,
            max_iters: 10,
        };
        assert!(linear_cg(&op, &rhs, &DVector::zeros(2), &bad).is_err());
        assert!(linear_cg(&op, &DVector::zeros(3), &DVector::zeros(2), &CgConfig::default()).is_err());
    }

    #[test]
    fn non_finite_operator_is_an_error() {
        let op = DenseOperator(DMatrix::from_element(2, 2, f64::NAN));
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            linear_cg(&op, &rhs, &DVector::zeros(2), &CgConfig::default()),
            Err(Error::NonFinite(_))
        ));
    }
}
