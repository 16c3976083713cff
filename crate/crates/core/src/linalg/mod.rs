//! Sparse matrices, iterative and banded direct solvers, and the M-matrix audit.

mod audit;
mod banded;
mod ilu;
mod krylov;
mod saddle;
mod sparse;

pub use audit::{audit_m_matrix, MMatrixAudit};
pub use banded::{reverse_cuthill_mckee, BandedLu};
pub use ilu::{IdentityPreconditioner, Ilu0, Jacobi, Preconditioner};
pub use krylov::{
    bicgstab, cg, project_mean_zero, solve_nonsymmetric, solve_nonsymmetric_from, solve_spd,
    solve_spd_from, KrylovOptions, LinearOperator, Nullspace, SolveStats,
};
pub use saddle::{solve_saddle, SaddleSolution, SaddleSystem};
pub use sparse::{CsrMatrix, TripletBuilder};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("{solver} broke down at iteration {iteration}")]
    Breakdown { solver: &'static str, iteration: usize },
    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),
    #[error("operand dimensions do not match")]
    DimensionMismatch,
}
