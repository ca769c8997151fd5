//! Randomized Gauss-Seidel (RGS) and extended randomized Gauss-Seidel (REGS)
//! least-squares solvers, together with a verification lab that cross-checks
//! the solvers against closed-form predictions for how the error aligns with
//! individual singular directions.
//!
//! Module layout:
//!
//! * [`linalg`] — dense matrices, one-sided Jacobi SVD, minimum-norm least squares
//! * [`sampling`] — reproducible RNG streams and norm-weighted index sampling
//! * [`solvers`] — RGS / REGS / RK iteration kernels and the trace-driven run loop
//! * [`oracle`] — exact one-step enumerations, closed-form predictors, error bounds
//! * [`diagnostics`] — per-iterate observables and Monte Carlo aggregation
//! * [`testgen`] — seeded problem families (Gaussian, near-singular, fixed spectrum)
//! * [`cli`] — config-driven `gen` / `run` / `verify` / `plot` commands

pub mod cli;
pub mod diagnostics;
pub mod linalg;
pub mod oracle;
pub mod sampling;
pub mod solvers;
pub mod testgen;
