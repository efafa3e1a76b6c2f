//! Solvers for the completion model: alternating minimization with linear CG
//! subproblem solves, an exact (dense) alternating reference, and ADMM.

mod admm;
mod altmin;
mod cg;

pub use admm::{admm, AdmmConfig};
pub use altmin::{altmin_cg, altmin_exact};
pub use cg::{linear_cg, CgConfig, CgOutcome, DenseOperator, LinearOperator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outer-loop stopping rule: the heuristic progress measure
/// `Delta_t = |E(U_t) - E(U_{t-1})|` on the training relative error, an
/// optional wall-time budget, and an iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingRule {
    pub delta_tol: f64,
    /// Wall-time budget in seconds; `None` means unbounded.
    pub time_budget_s: Option<f64>,
    pub max_outer_iters: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            delta_tol: 1e-6,
            time_budget_s: None,
            max_outer_iters: 500,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if self.delta_tol < 0.0 || !self.delta_tol.is_finite() {
            return Err(Error::invalid("delta_tol must be finite and >= 0"));
        }
        // max_outer_iters >= 1 keeps at least one budget finite
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be >= 1"));
        }
        if let Some(t) = self.time_budget_s {
            if !(t > 0.0) {
                return Err(Error::invalid("time budget must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DeltaTol,
    TimeBudget,
    MaxOuterIters,
}

/// One outer iteration of a solver trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub train_re: f64,
    pub train_rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_rmse: Option<f64>,
    pub time_s: f64,
    /// Inner CG iteration counts, one entry per mode.
    pub cg_iters: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admm_primal_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub termination: Termination,
    pub outer_iterations: usize,
    pub total_time_s: f64,
    pub final_objective: f64,
    pub final_train_re: f64,
    pub final_train_rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_test_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_test_rmse: Option<f64>,
    pub total_inner_iterations: usize,
}

/// Per-iteration trace plus a summary; one record per outer iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: Vec<IterationRecord>,
    pub summary: SolverSummary,
}

impl SolverReport {
    pub(crate) fn new(records: Vec<IterationRecord>, termination: Termination) -> Self {
        let last = records.last().expect("solvers record at least one iteration");
        let summary = SolverSummary {
            termination,
            outer_iterations: records.len(),
            total_time_s: last.time_s,
            final_objective: last.objective,
            final_train_re: last.train_re,
            final_train_rmse: last.train_rmse,
            final_test_re: last.test_re,
            final_test_rmse: last.test_rmse,
            total_inner_iterations: records.iter().map(|r| r.cg_iters.iter().sum::<usize>()).sum(),
        };
        SolverReport {
            iterations: records,
            summary,
        }
    }

    pub fn termination(&self) -> Termination {
        self.summary.termination
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("bad report JSON: {e}")))
    }

    /// CSV trace with the column order used across the experiment tooling.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,time_s,objective,train_rmse,test_rmse,train_re,test_re\n");
        for r in &self.iterations {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iter,
                r.time_s,
                r.objective,
                r.train_rmse,
                opt(r.test_rmse),
                r.train_re,
                opt(r.test_re),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::default().validate().is_ok());
        let bad = StoppingRule {
            max_outer_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad_time = StoppingRule {
            time_budget_s: Some(0.0),
            ..Default::default()
        };
        assert!(bad_time.validate().is_err());
    }

    #[test]
    fn report_round_trips_through_json() {
        let rec = IterationRecord {
            iter: 1,
            objective: 2.0,
            train_re: 0.5,
            train_rmse: 0.4,
            test_re: None,
            test_rmse: None,
            time_s: 0.1,
            cg_iters: vec![3, 4, 5],
            admm_primal_residual: None,
        };
        let report = SolverReport::new(vec![rec], Termination::DeltaTol);
        let back = SolverReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back.summary.outer_iterations, 1);
        assert_eq!(back.summary.total_inner_iterations, 12);
        assert_eq!(back.termination(), Termination::DeltaTol);
    }
}
