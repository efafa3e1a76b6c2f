//! Alternating minimization: cycle over the modes, solving each
//! graph-regularized least-squares subproblem either by matrix-free linear
//! CG (warm-started at the previous iterate) or by a dense factorization.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::cg::{linear_cg, CgConfig};
use super::{IterationRecord, SolverReport, StoppingRule, Termination};
use crate::error::{Error, Result};
use crate::subproblem::{
    objective_value, Regularization, SubproblemOperator, UNREGULARIZED_RIDGE,
};
use crate::tensor::{residual_on_omega, CpFactors, SparseObservations};

/// vec(U^T): the subproblem layout, one R-block per tensor row.
pub(super) fn factor_to_x(factor: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(factor.transpose().as_slice())
}

pub(super) fn x_to_factor(x: &DVector<f64>, rank: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rank, m, x.as_slice()).transpose()
}

pub(super) fn metrics_on(
    factors: &CpFactors,
    obs: &SparseObservations,
) -> Result<(f64, f64)> {
    let residual = residual_on_omega(factors, obs)?;
    let norm = residual.norm();
    Ok((norm / obs.norm(), norm / (obs.nnz() as f64).sqrt()))
}

pub(super) fn validate_inputs(
    train: &SparseObservations,
    init: &CpFactors,
    reg: &Regularization,
    stop: &StoppingRule,
) -> Result<()> {
    stop.validate()?;
    if init.shape() != *train.shape() {
        return Err(Error::shape("initial factors do not match the data shape"));
    }
    if reg.order() != init.order() {
        return Err(Error::shape("regularization order mismatch"));
    }
    if train.is_empty() || train.norm() == 0.0 {
        return Err(Error::invalid(
            "training set must be nonempty with nonzero norm",
        ));
    }
    Ok(())
}

/// Tracks the stopping criterion Delta_t = |E(U_t) - E(U_{t-1})| on the
/// training relative error, plus time and iteration budgets.
pub(super) struct OuterLoop<'a> {
    stop: &'a StoppingRule,
    start: Instant,
    prev_train_re: f64,
    pub records: Vec<IterationRecord>,
}

impl<'a> OuterLoop<'a> {
    pub fn begin(
        stop: &'a StoppingRule,
        init: &CpFactors,
        train: &SparseObservations,
    ) -> Result<Self> {
        let (train_re, _) = metrics_on(init, train)?;
        Ok(OuterLoop {
            stop,
            start: Instant::now(),
            prev_train_re: train_re,
            records: Vec::new(),
        })
    }

    /// Records one finished outer iteration and decides whether to stop.
    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &mut self,
        iter: usize,
        factors: &CpFactors,
        train: &SparseObservations,
        test: Option<&SparseObservations>,
        objective: f64,
        cg_iters: Vec<usize>,
        admm_primal_residual: Option<f64>,
    ) -> Result<Option<Termination>> {
        let (train_re, train_rmse) = metrics_on(factors, train)?;
        let (test_re, test_rmse) = match test {
            Some(t) => {
                let (re, rmse) = metrics_on(factors, t)?;
                (Some(re), Some(rmse))
            }
            None => (None, None),
        };
        self.records.push(IterationRecord {
            iter,
            objective,
            train_re,
            train_rmse,
            test_re,
            test_rmse,
            time_s: self.start.elapsed().as_secs_f64(),
            cg_iters,
            admm_primal_residual,
        });
        let delta = (train_re - self.prev_train_re).abs();
        self.prev_train_re = train_re;
        if delta <= self.stop.delta_tol {
            return Ok(Some(Termination::DeltaTol));
        }
        if let Some(budget) = self.stop.time_budget_s {
            if self.start.elapsed().as_secs_f64() > budget {
                return Ok(Some(Termination::TimeBudget));
            }
        }
        if iter >= self.stop.max_outer_iters {
            return Ok(Some(Termination::MaxOuterIters));
        }
        Ok(None)
    }
}

pub(super) fn ridge_for(reg: &Regularization, mode: usize) -> f64 {
    if reg.lambda(mode) == 0.0 {
        UNREGULARIZED_RIDGE
    } else {
        0.0
    }
}

/// Alternating minimization with linear CG on each mode subproblem.
pub fn altmin_cg(
    train: &SparseObservations,
    test: Option<&SparseObservations>,
    init: &CpFactors,
    reg: &Regularization,
    stop: &StoppingRule,
    cg: &CgConfig,
) -> Result<(CpFactors, SolverReport)> {
    validate_inputs(train, init, reg, stop)?;
    cg.validate()?;
    let k = init.order();
    let rank = init.rank();
    let mut factors = init.clone();
    let mut tracker = OuterLoop::begin(stop, init, train)?;
    for t in 1..=stop.max_outer_iters {
        let mut cg_iters = vec![0usize; k];
        for i in 0..k {
            let (op, q) = SubproblemOperator::build(train, &factors, i, reg, ridge_for(reg, i))?;
            let rhs = factor_to_x(&q);
            let x0 = factor_to_x(factors.factor(i));
            let out = linear_cg(&op, &rhs, &x0, cg)?;
            cg_iters[i] = out.iters;
            factors.set_factor(i, x_to_factor(&out.x, rank, op.n_rows()));
        }
        let objective = objective_value(&factors, train, reg)?;
        if let Some(reason) =
            tracker.observe(t, &factors, train, test, objective, cg_iters, None)?
        {
            return Ok((factors, SolverReport::new(tracker.records, reason)));
        }
    }
    unreachable!("loop always terminates via the iteration budget")
}

/// Alternating minimization with a dense factorization of each subproblem.
/// Reference implementation; the dense assembly is quadratic in m_i R.
pub fn altmin_exact(
    train: &SparseObservations,
    test: Option<&SparseObservations>,
    init: &CpFactors,
    reg: &Regularization,
    stop: &StoppingRule,
) -> Result<(CpFactors, SolverReport)> {
    validate_inputs(train, init, reg, stop)?;
    let k = init.order();
    let rank = init.rank();
    let mut factors = init.clone();
    let mut tracker = OuterLoop::begin(stop, init, train)?;
    for t in 1..=stop.max_outer_iters {
        for i in 0..k {
            let (op, q) = SubproblemOperator::build(train, &factors, i, reg, ridge_for(reg, i))?;
            let dense = op.assemble_dense();
            let rhs = factor_to_x(&q);
            let chol = dense.cholesky().ok_or_else(|| {
                Error::SolverFailure(format!("singular subproblem system in mode {i}"))
            })?;
            let x = chol.solve(&rhs);
            factors.set_factor(i, x_to_factor(&x, rank, op.n_rows()));
        }
        let objective = objective_value(&factors, train, reg)?;
        if let Some(reason) =
            tracker.observe(t, &factors, train, test, objective, vec![0; k], None)?
        {
            return Ok((factors, SolverReport::new(tracker.records, reason)));
        }
    }
    unreachable!("loop always terminates via the iteration budget")
}
