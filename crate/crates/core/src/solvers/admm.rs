//! ADMM for the completion model: per-mode copies B^{(i)} of the factors
//! carry the Laplacian term, coupled through multipliers Y^{(i)} and a
//! growing penalty eta.
//!
//! Each outer iteration updates, mode by mode: the rows of U^{(i)} through
//! independent R x R SPD solves, B^{(i)} through CG on
//! `(eta I + lambda_i L^(i)) B = eta U - Y`, and the multiplier
//! `Y <- Y + eta (B - U)`; eta is scaled by gamma afterwards.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::altmin::{validate_inputs, OuterLoop};
use super::cg::{linear_cg, CgConfig, LinearOperator};
use super::{SolverReport, StoppingRule};
use crate::error::{Error, Result};
use crate::graph::ShiftedLaplacian;
use crate::subproblem::{build_row_system, objective_value, Regularization, SubproblemOperator};
use crate::tensor::{CpFactors, SparseObservations};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub eta0: f64,
    /// Penalty growth factor, eta_{t+1} = gamma * eta_t.
    pub gamma: f64,
    /// CG settings for the B-updates.
    pub b_cg: CgConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            eta0: 1.0,
            gamma: 1.05,
            b_cg: CgConfig {
                rel_tol: 1e-10,
                max_iters: 500,
            },
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) {
            return Err(Error::invalid("eta0 must be > 0"));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::invalid("gamma must be >= 1"));
        }
        self.b_cg.validate()
    }
}

/// eta I + lambda_i L^{(i)}, the SPD system of the B-update.
struct BStepOperator<'l, 's> {
    eta: f64,
    lambda: f64,
    shifted: &'s ShiftedLaplacian<'l>,
}

impl LinearOperator for BStepOperator<'_, '_> {
    fn dim(&self) -> usize {
        self.shifted.n()
    }
    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = x * self.eta;
        if self.lambda != 0.0 {
            y.axpy(self.lambda, &self.shifted.apply_vec(x)?, 1.0);
        }
        Ok(y)
    }
}

pub fn admm(
    train: &SparseObservations,
    test: Option<&SparseObservations>,
    init: &CpFactors,
    reg: &Regularization,
    stop: &StoppingRule,
    cfg: &AdmmConfig,
) -> Result<(CpFactors, SolverReport)> {
    validate_inputs(train, init, reg, stop)?;
    cfg.validate()?;
    let k = init.order();
    let mut factors = init.clone();
    let mut copies: Vec<DMatrix<f64>> = factors.factors().to_vec();
    let mut multipliers: Vec<DMatrix<f64>> = factors
        .factors()
        .iter()
        .map(|f| DMatrix::zeros(f.nrows(), f.ncols()))
        .collect();
    let mut eta = cfg.eta0;
    let mut tracker = OuterLoop::begin(stop, init, train)?;
    for t in 1..=stop.max_outer_iters {
        let mut cg_iters = vec![0usize; k];
        for i in 0..k {
            // the Laplacian term lives in the B subproblem; the ridge is
            // unnecessary here because eta keeps the row systems SPD
            let (op, q) = SubproblemOperator::build(train, &factors, i, reg, 0.0)?;
            let m = op.n_rows();
            let rank = op.rank();

            // U-update: row systems are mutually independent
            let b_i = &copies[i];
            let y_i = &multipliers[i];
            let rows: Vec<DVector<f64>> = (0..m)
                .into_par_iter()
                .map(|j| {
                    let (a, rhs) = build_row_system(&op, &q, j, eta, b_i.row(j), y_i.row(j));
                    a.cholesky()
                        .map(|c| c.solve(&rhs))
                        .ok_or_else(|| Error::SolverFailure(format!("row system {j} not SPD")))
                })
                .collect::<Result<_>>()?;
            let mut u_new = DMatrix::zeros(m, rank);
            for (j, row) in rows.iter().enumerate() {
                u_new.row_mut(j).copy_from(&row.transpose());
            }
            factors.set_factor(i, u_new);

            // B-update: (eta I + lambda_i L) B = eta U - Y, column by column
            let shifted = reg.shifted(i, m)?;
            let b_op = BStepOperator {
                eta,
                lambda: reg.lambda(i),
                shifted: &shifted,
            };
            let rhs_mat = factors.factor(i) * eta - &multipliers[i];
            let mut b_new = DMatrix::zeros(m, rank);
            for r in 0..rank {
                let out = linear_cg(
                    &b_op,
                    &rhs_mat.column(r).into_owned(),
                    &copies[i].column(r).into_owned(),
                    &cfg.b_cg,
                )?;
                cg_iters[i] += out.iters;
                b_new.set_column(r, &out.x);
            }
            copies[i] = b_new;

            // Y-update
            let gap = &copies[i] - factors.factor(i);
            multipliers[i] += gap * eta;
        }
        let primal = (0..k)
            .map(|i| {
                let gap = (&copies[i] - factors.factor(i)).norm();
                gap / factors.factor(i).norm().max(1.0)
            })
            .fold(0.0f64, f64::max);
        let objective = objective_value(&factors, train, reg)?;
        if let Some(reason) = tracker.observe(
            t,
            &factors,
            train,
            test,
            objective,
            cg_iters,
            Some(primal),
        )? {
            return Ok((factors, SolverReport::new(tracker.records, reason)));
        }
        eta *= cfg.gamma;
    }
    unreachable!("loop always terminates via the iteration budget")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Termination;
    use crate::tensor::Shape;

    #[test]
    fn unregularized_first_iteration_has_zero_primal_residual() {
        // lambda = 0 everywhere: B-update gives B = U - Y/eta, and Y_0 = 0,
        // so B_1 = U_1 exactly.
        let shape = Shape::new(vec![4, 3, 2]).unwrap();
        let mut rng = crate::testutil::rng(61);
        let truth = CpFactors::random_gaussian(&shape, 2, &mut rng);
        let entries = (0..shape.num_entries())
            .map(|lin| {
                let idx = shape.multi_index(lin);
                let v = truth.value_at(&idx);
                (idx, v)
            })
            .collect();
        let obs = SparseObservations::new(shape.clone(), entries).unwrap();
        let reg = Regularization::none(3);
        let init = CpFactors::random_gaussian(&shape, 2, &mut rng);
        let stop = StoppingRule {
            delta_tol: 0.0,
            max_outer_iters: 1,
            ..Default::default()
        };
        let (_, report) = admm(&obs, None, &init, &reg, &stop, &AdmmConfig::default()).unwrap();
        assert_eq!(report.termination(), Termination::MaxOuterIters);
        let primal = report.iterations[0].admm_primal_residual.unwrap();
        assert!(primal < 1e-9, "primal residual {primal} should vanish");
    }

    #[test]
    fn multiplier_untouched_when_copies_match() {
        // direct check of the Y-update algebra
        let mut y = DMatrix::from_element(2, 2, 0.5);
        let b = DMatrix::from_element(2, 2, 1.25);
        let u = b.clone();
        let gap = &b - &u;
        y += gap * 3.0;
        assert_eq!(y, DMatrix::from_element(2, 2, 0.5));
    }
}
