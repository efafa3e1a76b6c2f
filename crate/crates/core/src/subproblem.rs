//! The per-mode quadratic subproblem of alternating minimization.
//!
//! With the other factors fixed, the subproblem in U^{(i)} is the quadratic
//! `g(x) = 1/2 x^T M x - vec(Q)^T x` over `x = vec(U^{(i)T})`, where
//!
//! ```text
//! M = A + lambda_i * (L^(i) kron I_R) + (I_m kron C),
//! Q = (P_Omega unfolding of T) * D,     D = (U^{(j)})^{odot, j != i}.
//! ```
//!
//! A is block diagonal with one R x R Gram block per unfolding row, built
//! from the Khatri-Rao rows of the observed entries; it is never
//! materialized on the conjugate-gradient path. The operator caches those
//! rows at construction so one application costs
//! O(|Omega| R + nnz(L) R + m R).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{GraphLaplacian, ShiftedLaplacian};
use crate::tensor::{
    khatri_rao_col_norms_sq, kr_row_excluding, residual_on_omega, CpFactors, SparseObservations,
};

/// Ridge added to keep the subproblem positive definite when a mode carries
/// no regularization at all (lambda_i = 0).
pub const UNREGULARIZED_RIDGE: f64 = 1e-10;

/// Model parameters: per-mode weights lambda_i, the Laplacian shift weight
/// lambda_L, and an optional graph Laplacian per mode.
#[derive(Debug, Clone)]
pub struct Regularization {
    lambdas: Vec<f64>,
    lambda_l: f64,
    laplacians: Vec<Option<GraphLaplacian>>,
}

impl Regularization {
    pub fn new(
        lambdas: Vec<f64>,
        lambda_l: f64,
        laplacians: Vec<Option<GraphLaplacian>>,
    ) -> Result<Self> {
        if lambdas.len() != laplacians.len() {
            return Err(Error::shape("one lambda and one Laplacian slot per mode"));
        }
        if lambdas.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::invalid("lambda_i must be finite and >= 0"));
        }
        if lambda_l < 0.0 || !lambda_l.is_finite() {
            return Err(Error::invalid("lambda_L must be finite and >= 0"));
        }
        Ok(Regularization {
            lambdas,
            lambda_l,
            laplacians,
        })
    }

    /// All regularization weights zero.
    pub fn none(order: usize) -> Self {
        Regularization {
            lambdas: vec![0.0; order],
            lambda_l: 0.0,
            laplacians: (0..order).map(|_| None).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambda(&self, mode: usize) -> f64 {
        self.lambdas[mode]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda_l(&self) -> f64 {
        self.lambda_l
    }

    pub fn laplacian(&self, mode: usize) -> Option<&GraphLaplacian> {
        self.laplacians[mode].as_ref()
    }

    /// L^{(i)} = lambda_L Lap^{(i)} + I for a mode of dimension m.
    pub fn shifted(&self, mode: usize, m: usize) -> Result<ShiftedLaplacian<'_>> {
        ShiftedLaplacian::new(self.laplacians[mode].as_ref(), self.lambda_l, m)
    }
}

/// Diagonal of C^{(i)} = sum_{j != i} lambda_j diag(||U^{(-i,-j)}_{:,r}||^2).
/// The exclusion product over an empty set (order 2) is all ones.
pub fn build_c(factors: &CpFactors, mode: usize, lambdas: &[f64]) -> DVector<f64> {
    let rank = factors.rank();
    let mut c = DVector::zeros(rank);
    for j in 0..factors.order() {
        if j == mode || lambdas[j] == 0.0 {
            continue;
        }
        let mats: Vec<&DMatrix<f64>> = (0..factors.order())
            .filter(|&n| n != mode && n != j)
            .map(|n| factors.factor(n))
            .collect();
        if mats.is_empty() {
            c.add_scalar_mut(lambdas[j]);
        } else {
            let norms = khatri_rao_col_norms_sq(&mats).expect("nonempty by construction");
            c.axpy(lambdas[j], &norms, 1.0);
        }
    }
    c
}

/// Q^{(i)}: row s is sum over observed (s, l) of t_{s,l} * d_{l,:}.
pub fn build_q(obs: &SparseObservations, factors: &CpFactors, mode: usize) -> DMatrix<f64> {
    let rank = factors.rank();
    let m = obs.shape().dim(mode);
    let grouping = obs.mode_grouping(mode);
    let mut q = DMatrix::zeros(m, rank);
    let mut d = vec![0.0; rank];
    for s in 0..m {
        for (pos, _) in grouping.row(s) {
            kr_row_excluding(factors, mode, obs.index(pos), &mut d);
            let t = obs.value(pos);
            for r in 0..rank {
                q[(s, r)] += t * d[r];
            }
        }
    }
    q
}

/// Matrix-free representation of M^{(i)}, with the Khatri-Rao rows of the
/// observed entries cached in unfolding-row order.
#[derive(Debug)]
pub struct SubproblemOperator<'a> {
    mode: usize,
    m: usize,
    rank: usize,
    row_ptr: Vec<usize>,
    d_rows: Vec<f64>, // nnz * rank, one row per observation
    vals: Vec<f64>,   // observed values, same order
    lambda_mode: f64,
    shifted: ShiftedLaplacian<'a>,
    c_diag: DVector<f64>,
    ridge: f64,
}

impl<'a> SubproblemOperator<'a> {
    /// Builds the operator and right-hand side Q for one mode, at the current
    /// values of the other factors. `ridge` should be 0 for exact gradient
    /// evaluation and `UNREGULARIZED_RIDGE` when solving with lambda_i = 0.
    pub fn build(
        obs: &SparseObservations,
        factors: &CpFactors,
        mode: usize,
        reg: &'a Regularization,
        ridge: f64,
    ) -> Result<(Self, DMatrix<f64>)> {
        if factors.shape() != *obs.shape() {
            return Err(Error::shape("factor shape does not match observations"));
        }
        if reg.order() != factors.order() {
            return Err(Error::shape("regularization order mismatch"));
        }
        let rank = factors.rank();
        let m = obs.shape().dim(mode);
        let grouping = obs.mode_grouping(mode);
        let nnz = grouping.nnz();

        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut d_rows = vec![0.0; nnz * rank];
        let mut vals = Vec::with_capacity(nnz);
        let mut q = DMatrix::zeros(m, rank);
        row_ptr.push(0);
        let mut at = 0;
        for s in 0..m {
            for (pos, _) in grouping.row(s) {
                let d = &mut d_rows[at * rank..(at + 1) * rank];
                kr_row_excluding(factors, mode, obs.index(pos), d);
                let t = obs.value(pos);
                vals.push(t);
                for r in 0..rank {
                    q[(s, r)] += t * d[r];
                }
                at += 1;
            }
            row_ptr.push(at);
        }

        let op = SubproblemOperator {
            mode,
            m,
            rank,
            row_ptr,
            d_rows,
            vals,
            lambda_mode: reg.lambda(mode),
            shifted: reg.shifted(mode, m)?,
            c_diag: build_c(factors, mode, reg.lambdas()),
            ridge,
        };
        Ok((op, q))
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.m * self.rank
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn c_diag(&self) -> &DVector<f64> {
        &self.c_diag
    }

    pub fn lambda_mode(&self) -> f64 {
        self.lambda_mode
    }

    pub fn shifted(&self) -> &ShiftedLaplacian<'a> {
        &self.shifted
    }

    pub fn nnz_obs(&self) -> usize {
        self.vals.len()
    }

    fn d_row(&self, at: usize) -> &[f64] {
        &self.d_rows[at * self.rank..(at + 1) * self.rank]
    }

    /// A^{(i)} x in matrix layout: column j of the result is
    /// sum over observed (j, l) of (d_l . x_j) d_l.
    pub fn apply_a(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rank, self.m);
        self.apply_a_into(x, &mut out);
        out
    }

    fn apply_a_into(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        debug_assert_eq!(x.nrows(), self.rank);
        debug_assert_eq!(x.ncols(), self.m);
        for j in 0..self.m {
            let xj = x.column(j);
            let mut oj = out.column_mut(j);
            for at in self.row_ptr[j]..self.row_ptr[j + 1] {
                let d = self.d_row(at);
                let coef: f64 = d.iter().zip(xj.iter()).map(|(a, b)| a * b).sum();
                for (o, dv) in oj.iter_mut().zip(d) {
                    *o += coef * dv;
                }
            }
        }
    }

    /// M^{(i)} x in matrix layout X (R x m, column j carries row j of U).
    pub fn apply_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rank, self.m);
        // I_m kron C: scale row r by c_r
        for j in 0..self.m {
            let xj = x.column(j);
            let mut oj = out.column_mut(j);
            for r in 0..self.rank {
                oj[r] += self.c_diag[r] * xj[r];
            }
        }
        // lambda_i * X L^{(i)}
        if self.lambda_mode != 0.0 {
            self.shifted.apply_right_scaled(self.lambda_mode, x, &mut out);
        }
        self.apply_a_into(x, &mut out);
        if self.ridge != 0.0 {
            out.zip_apply(x, |o, xv| *o += self.ridge * xv);
        }
        out
    }

    /// M^{(i)} x in the vectorized layout x = vec(U^{(i)T}).
    pub fn apply_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!(
                "operator dimension {} but vector length {}",
                self.dim(),
                x.len()
            )));
        }
        let xm = DMatrix::from_column_slice(self.rank, self.m, x.as_slice());
        let out = self.apply_mat(&xm);
        Ok(DVector::from_column_slice(out.as_slice()))
    }

    /// The R x R Gram block A_j of one unfolding row.
    pub fn row_gram(&self, j: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rank, self.rank);
        for at in self.row_ptr[j]..self.row_ptr[j + 1] {
            let d = self.d_row(at);
            for r in 0..self.rank {
                for c in 0..self.rank {
                    a[(r, c)] += d[r] * d[c];
                }
            }
        }
        a
    }

    /// Dense mR x mR assembly of M^{(i)} (including the ridge). Reference
    /// path for the exact alternating solver; quadratic memory, so the
    /// caller keeps m R modest.
    pub fn assemble_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let rank = self.rank;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..self.m {
            let a = self.row_gram(j);
            let mut block = m.view_mut((j * rank, j * rank), (rank, rank));
            block += a;
            for r in 0..rank {
                block[(r, r)] += self.c_diag[r] + self.ridge;
            }
        }
        if self.lambda_mode != 0.0 {
            let l = self.shifted.to_dense();
            for j1 in 0..self.m {
                for j2 in 0..self.m {
                    let v = self.lambda_mode * l[(j1, j2)];
                    if v != 0.0 {
                        for r in 0..rank {
                            m[(j1 * rank + r, j2 * rank + r)] += v;
                        }
                    }
                }
            }
        }
        m
    }
}

/// Dense R x R system of the ADMM row update for unfolding row j:
/// `(A_j + eta I + C) u_j = (Q + eta B + Y)_{j,:}`.
pub fn build_row_system(
    op: &SubproblemOperator<'_>,
    q: &DMatrix<f64>,
    j: usize,
    eta: f64,
    b: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let rank = op.rank();
    let mut a = op.row_gram(j);
    for r in 0..rank {
        a[(r, r)] += eta + op.c_diag[r];
    }
    let mut rhs = DVector::zeros(rank);
    for r in 0..rank {
        rhs[r] = q[(j, r)] + eta * b[(j, r)] + y[(j, r)];
    }
    (a, rhs)
}

/// The objective of the completion model:
/// `1/2 ||P_Omega(T - [[U]])||^2 + sum_i lambda_i/2 (<U U^T, L^(i)> + sum_r prod_{j != i} ||u_r^(j)||^2)`.
pub fn objective_value(
    factors: &CpFactors,
    obs: &SparseObservations,
    reg: &Regularization,
) -> Result<f64> {
    if reg.order() != factors.order() {
        return Err(Error::shape("regularization order mismatch"));
    }
    let residual = residual_on_omega(factors, obs)?;
    let mut f = 0.5 * residual.values().iter().map(|v| v * v).sum::<f64>();
    for i in 0..factors.order() {
        let lambda = reg.lambda(i);
        if lambda == 0.0 {
            continue;
        }
        let u = factors.factor(i);
        let shifted = reg.shifted(i, u.nrows())?;
        f += 0.5 * lambda * shifted.quadratic(u)?;
        let mats: Vec<&DMatrix<f64>> = (0..factors.order())
            .filter(|&j| j != i)
            .map(|j| factors.factor(j))
            .collect();
        let norms = khatri_rao_col_norms_sq(&mats)?;
        f += 0.5 * lambda * norms.sum();
    }
    Ok(f)
}

/// Full gradient: per mode, unvec(M^{(i)} vec(U^{(i)T}) - vec(Q^{(i)})) with
/// all blocks evaluated at the same point. No ridge is applied here.
pub fn objective_gradient(
    factors: &CpFactors,
    obs: &SparseObservations,
    reg: &Regularization,
) -> Result<Vec<DMatrix<f64>>> {
    let mut grads = Vec::with_capacity(factors.order());
    for i in 0..factors.order() {
        let (op, q) = SubproblemOperator::build(obs, factors, i, reg, 0.0)?;
        let x = factors.factor(i).transpose();
        let grad_x = op.apply_mat(&x) - q.transpose();
        grads.push(grad_x.transpose());
    }
    Ok(grads)
}

pub fn gradient_norm(grads: &[DMatrix<f64>]) -> f64 {
    grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt()
}
