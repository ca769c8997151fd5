//! Dense linear algebra: row-major matrices, one-sided Jacobi SVD and
//! minimum-norm least-squares problems.
//!
//! Everything is `f64`. Matrices are stored row-major; column access goes
//! through strided index helpers rather than copies.

mod lsq;
mod matrix;
mod svd;

pub use lsq::{min_norm_from_svd, min_norm_lsq, LsqProblem};
pub use matrix::{matvec, matvec_t, DenseMatrix, LinalgError, Vector};
pub use svd::{svd, svd_with_tol, SvdFactorization, DEFAULT_RANK_TOL};
