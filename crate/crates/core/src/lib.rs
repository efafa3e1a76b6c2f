//! Graph-regularized low-rank tensor completion in CP format.
//!
//! The completion model fits CP factors U^{(1)}, ..., U^{(k)} to the observed
//! entries of a tensor while penalizing, per mode, the graph Laplacian
//! quadratic form of the factor and the Frobenius norm of the complementary
//! Khatri-Rao product:
//!
//! ```text
//! min  1/2 ||P_Omega(T - [[U]])||^2
//!      + sum_i lambda_i/2 <U^(i) U^(i)T, L^(i)>
//!      + sum_i lambda_i/2 ||(U^(j))^{odot, j != i}||^2,
//! L^(i) = lambda_L * Lap^(i) + I.
//! ```
//!
//! Two solvers are provided: alternating minimization with a matrix-free
//! linear conjugate gradient on each mode subproblem, and an ADMM scheme that
//! splits the Laplacian term off through per-mode copies. Supporting modules
//! cover graph construction, synthetic data generation, cross-validation and
//! experiment orchestration.

pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod solvers;
pub mod subproblem;
pub mod tensor;

pub use error::{Error, Result};
