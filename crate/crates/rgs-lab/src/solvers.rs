//! Iteration kernels and the trace-driven run loop.
//!
//! Three methods share the loop:
//!
//! * **RGS** — pick column `j` with probability `||A_(j)||^2 / ||A||_F^2`,
//!   then shift coordinate `j` of `x` so the residual becomes orthogonal to
//!   that column. The image `w = A x` is kept incrementally: only a multiple
//!   of column `j` is added per step.
//! * **REGS** — an RGS step for `x`, followed by picking row `i` with
//!   probability `||A^(i)||^2 / ||A||_F^2` and projecting a second iterate
//!   `z` one row-hyperplane closer to solving `A z = A x`. `z` stays in the
//!   row space, which is what makes it converge on rank-deficient problems.
//! * **RK** — classic randomized Kaczmarz on `A x = b` (row sampling, row
//!   projections), included as the comparison point for right-singular
//!   projections on consistent systems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{matvec, DenseMatrix, LinalgError, LsqProblem, Vector};
use crate::sampling::{build_distribution, derive_stream, SamplingError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("column {0} has zero norm and cannot be selected")]
    ZeroColumn(usize),
    #[error("row {0} has zero norm and cannot be selected")]
    ZeroRow(usize),
    #[error("initial x has length {found}, expected {expected}")]
    BadInitialX { expected: usize, found: usize },
    #[error("initial z has length {found}, expected {expected}")]
    BadInitialZ { expected: usize, found: usize },
    #[error("initial z is not in the row space of A (component {0:.3e} outside)")]
    InitialZOutsideRowSpace(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Which iteration the run loop executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rgs,
    Regs,
    Rk,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rgs => "rgs",
            Method::Regs => "regs",
            Method::Rk => "rk",
        }
    }
}

/// Run-loop configuration. `master_seed` keys the RNG streams; the per-trial
/// stream is `derive_stream(master_seed, trial_id)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: Method,
    pub max_iters: usize,
    pub master_seed: u64,
    /// Trace hook cadence: the hook fires at k = 0, at every multiple of
    /// `trace_every`, and at the final iteration.
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    /// The cached image `w = A x` is recomputed from scratch at every
    /// multiple of this many steps to stop rounding drift.
    #[serde(default = "default_refresh_every")]
    pub refresh_every: usize,
}

fn default_trace_every() -> usize {
    10
}

fn default_refresh_every() -> usize {
    1000
}

impl SolverConfig {
    pub fn new(mode: Method, max_iters: usize, master_seed: u64) -> Self {
        Self {
            mode,
            max_iters,
            master_seed,
            trace_every: default_trace_every(),
            refresh_every: default_refresh_every(),
        }
    }
}

/// RGS iterate: the coefficient vector, its cached image `w = A x`, and the
/// step count.
#[derive(Debug, Clone)]
pub struct RgsState {
    pub x: Vector,
    pub w: Vector,
    pub k: usize,
}

impl RgsState {
    /// Starts from `x`, computing the image cache.
    pub fn start(a: &DenseMatrix, x: Vector) -> Result<Self, SolveError> {
        let w = matvec(a, &x)?;
        Ok(Self { x, w, k: 0 })
    }

    /// Recomputes `w = A x` from scratch.
    pub fn refresh(&mut self, a: &DenseMatrix) -> Result<(), SolveError> {
        self.w = matvec(a, &self.x)?;
        Ok(())
    }
}

/// REGS iterate: the RGS pair plus the row-space iterate `z`.
#[derive(Debug, Clone)]
pub struct RegsState {
    pub inner: RgsState,
    pub z: Vector,
}

/// One RGS update with column `j`: moves coordinate `j` of `x` so that
/// column `j` becomes orthogonal to the new residual, and patches the cached
/// image with the same multiple of the column.
pub fn rgs_step(
    state: &mut RgsState,
    a: &DenseMatrix,
    b: &Vector,
    j: usize,
) -> Result<(), SolveError> {
    let mut num = 0.0;
    let mut csq = 0.0;
    for i in 0..a.rows() {
        let aij = a.get(i, j);
        num += aij * (state.w[i] - b[i]);
        csq += aij * aij;
    }
    if csq == 0.0 {
        return Err(SolveError::ZeroColumn(j));
    }
    let g = num / csq;
    state.x[j] -= g;
    a.col_axpy(j, -g, &mut state.w);
    state.k += 1;
    Ok(())
}

/// One Kaczmarz projection of `z` toward the hyperplane
/// `A^(i) z = A^(i) target`.
pub fn rk_step(
    z: &mut Vector,
    a: &DenseMatrix,
    target: &Vector,
    i: usize,
) -> Result<(), SolveError> {
    let mut num = 0.0;
    let mut rsq = 0.0;
    for (aij, (zj, tj)) in a
        .row(i)
        .iter()
        .zip(z.as_slice().iter().zip(target.as_slice()))
    {
        num += aij * (zj - tj);
        rsq += aij * aij;
    }
    if rsq == 0.0 {
        return Err(SolveError::ZeroRow(i));
    }
    a.row_axpy(i, -num / rsq, z);
    Ok(())
}

/// One Kaczmarz projection of `x` onto the solution hyperplane of row `i` of
/// `A x = b`; the RK-mode inner step.
fn rk_step_rhs(x: &mut Vector, a: &DenseMatrix, b: &Vector, i: usize) -> Result<(), SolveError> {
    let mut num = -b[i];
    let mut rsq = 0.0;
    for (aij, xj) in a.row(i).iter().zip(x.as_slice()) {
        num += aij * xj;
        rsq += aij * aij;
    }
    if rsq == 0.0 {
        return Err(SolveError::ZeroRow(i));
    }
    a.row_axpy(i, -num / rsq, x);
    Ok(())
}

/// One REGS update: RGS on `(x, w)` with column `j`, then a Kaczmarz
/// projection of `z` toward `A z = A x_new` with row `i`.
pub fn regs_step(
    state: &mut RegsState,
    a: &DenseMatrix,
    b: &Vector,
    j: usize,
    i: usize,
) -> Result<(), SolveError> {
    rgs_step(&mut state.inner, a, b, j)?;
    rk_step(&mut state.z, a, &state.inner.x, i)
}

/// Read-only view of the current iterate handed to trace hooks.
///
/// `ax` is the incrementally maintained image `A x` where the method keeps
/// one (RGS/REGS); RK mode leaves it `None` rather than paying a full
/// matrix-vector product per step.
#[derive(Debug, Clone, Copy)]
pub struct IterateView<'a> {
    pub k: usize,
    pub x: &'a Vector,
    pub ax: Option<&'a Vector>,
    pub z: Option<&'a Vector>,
}

/// Final iterate returned by [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub x: Vector,
    pub ax: Option<Vector>,
    pub z: Option<Vector>,
    pub steps: usize,
}

/// Optional initial iterates; both default to zero vectors. An explicit `z0`
/// must lie in the row space of `A` (that is the REGS convergence
/// precondition), checked against the problem's SVD.
#[derive(Debug, Clone, Default)]
pub struct Initial {
    pub x0: Option<Vector>,
    pub z0: Option<Vector>,
}

/// Runs `config.max_iters` iterations of the configured method on `problem`,
/// drawing from `derive_stream(config.master_seed, trial_id)`. The hook fires
/// at `k = 0`, every `trace_every` steps, and at the final step.
///
/// Per iteration REGS draws the column index first, then the row index.
pub fn run<F>(
    problem: &LsqProblem,
    config: &SolverConfig,
    trial_id: u64,
    init: Initial,
    mut hook: F,
) -> Result<RunOutcome, SolveError>
where
    F: FnMut(IterateView<'_>),
{
    let a = problem.a();
    let b = problem.b();
    let x0 = match init.x0 {
        Some(x) => {
            if x.len() != a.cols() {
                return Err(SolveError::BadInitialX {
                    expected: a.cols(),
                    found: x.len(),
                });
            }
            x
        }
        None => Vector::zeros(a.cols()),
    };
    let z0 = match init.z0 {
        Some(z) => {
            if z.len() != a.cols() {
                return Err(SolveError::BadInitialZ {
                    expected: a.cols(),
                    found: z.len(),
                });
            }
            check_row_space(problem, &z)?;
            z
        }
        None => Vector::zeros(a.cols()),
    };

    let mut rng = derive_stream(config.master_seed, trial_id);
    let trace_every = config.trace_every.max(1);
    let refresh_every = config.refresh_every.max(1);

    macro_rules! fire {
        ($k:expr, $x:expr, $ax:expr, $z:expr) => {
            if $k == 0 || $k % trace_every == 0 || $k == config.max_iters {
                hook(IterateView {
                    k: $k,
                    x: $x,
                    ax: $ax,
                    z: $z,
                });
            }
        };
    }

    match config.mode {
        Method::Rgs => {
            let col_dist = build_distribution(problem.col_sq_norms())?;
            let mut state = RgsState::start(a, x0)?;
            fire!(0, &state.x, Some(&state.w), None);
            for k in 1..=config.max_iters {
                let j = col_dist.sample(&mut rng);
                rgs_step(&mut state, a, b, j)?;
                if k % refresh_every == 0 {
                    state.refresh(a)?;
                }
                fire!(k, &state.x, Some(&state.w), None);
            }
            Ok(RunOutcome {
                ax: Some(state.w),
                x: state.x,
                z: None,
                steps: config.max_iters,
            })
        }
        Method::Regs => {
            let col_dist = build_distribution(problem.col_sq_norms())?;
            let row_dist = build_distribution(problem.row_sq_norms())?;
            let mut state = RegsState {
                inner: RgsState::start(a, x0)?,
                z: z0,
            };
            fire!(0, &state.inner.x, Some(&state.inner.w), Some(&state.z));
            for k in 1..=config.max_iters {
                let j = col_dist.sample(&mut rng);
                let i = row_dist.sample(&mut rng);
                regs_step(&mut state, a, b, j, i)?;
                if k % refresh_every == 0 {
                    state.inner.refresh(a)?;
                }
                fire!(k, &state.inner.x, Some(&state.inner.w), Some(&state.z));
            }
            Ok(RunOutcome {
                ax: Some(state.inner.w),
                x: state.inner.x,
                z: Some(state.z),
                steps: config.max_iters,
            })
        }
        Method::Rk => {
            let row_dist = build_distribution(problem.row_sq_norms())?;
            let mut x = x0;
            fire!(0, &x, None, None);
            for k in 1..=config.max_iters {
                let i = row_dist.sample(&mut rng);
                rk_step_rhs(&mut x, a, b, i)?;
                fire!(k, &x, None, None);
            }
            Ok(RunOutcome {
                x,
                ax: None,
                z: None,
                steps: config.max_iters,
            })
        }
    }
}

/// Rejects `z` with a component outside the row space beyond rounding scale.
fn check_row_space(problem: &LsqProblem, z: &Vector) -> Result<(), SolveError> {
    let f = problem.svd();
    let mut residual = z.clone();
    for l in 0..f.rank() {
        let coef = f.v().col_dot(l, z);
        f.v().col_axpy(l, -coef, &mut residual);
    }
    let outside = residual.norm();
    if outside > 1e-8 * z.norm().max(1.0) {
        return Err(SolveError::InitialZOutsideRowSpace(outside));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;
    use crate::testgen::{self, MatrixSpec, RhsMode};

    fn diag21_problem() -> LsqProblem {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        LsqProblem::new(a, Vector::zeros(2)).unwrap()
    }

    #[test]
    fn rgs_step_hand_worked_update() {
        // A = diag(2, 1), b = 0, x = (1, 1), column 0:
        // g = (2*2)/4 = 1, so x -> (0, 1) and w -> (0, 1).
        let p = diag21_problem();
        let mut state = RgsState::start(p.a(), Vector::new(vec![1.0, 1.0]).unwrap()).unwrap();
        rgs_step(&mut state, p.a(), p.b(), 0).unwrap();
        assert_eq!(state.x.as_slice(), &[0.0, 1.0]);
        assert_eq!(state.w.as_slice(), &[0.0, 1.0]);
        assert_eq!(state.k, 1);
    }

    #[test]
    fn rgs_step_changes_exactly_one_coordinate() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(9, 6, 3)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 4, RhsMode::GaussianInconsistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let mut rng = RngStream::new(8, 0);
        let x = Vector::from_raw((0..6).map(|_| rng.next_gaussian()).collect());
        for j in 0..6 {
            let mut state = RgsState::start(p.a(), x.clone()).unwrap();
            rgs_step(&mut state, p.a(), p.b(), j).unwrap();
            for t in 0..6 {
                if t != j {
                    assert_eq!(state.x[t], x[t], "coordinate {t} moved for column {j}");
                }
            }
            // After the step, column j is orthogonal to the residual.
            let resid = state.w.sub(p.b());
            let g = p.a().col_dot(j, &resid);
            assert!(g.abs() <= 1e-12 * resid.norm().max(1.0) * p.col_sq_norms()[j].sqrt());
        }
    }

    #[test]
    fn image_cache_stays_coherent() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(9, 6, 3)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 4, RhsMode::GaussianInconsistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let dist = build_distribution(p.col_sq_norms()).unwrap();
        let mut rng = RngStream::new(1, 2);
        let mut state = RgsState::start(p.a(), Vector::zeros(6)).unwrap();
        for _ in 0..500 {
            let j = dist.sample(&mut rng);
            rgs_step(&mut state, p.a(), p.b(), j).unwrap();
        }
        let fresh = matvec(p.a(), &state.x).unwrap();
        let drift = state.w.sub(&fresh).norm();
        let scale = (p.frob_sq().sqrt() * state.x.norm()).max(1.0);
        assert!(drift <= 1e-8 * scale, "cache drift {drift}");
    }

    #[test]
    fn rk_step_hand_worked_update() {
        // A = diag(2, 1), z = (1, 1), target x' = (0, 1):
        // row 1 sees no misfit so z is unchanged; row 0 moves z to (0, 1).
        let p = diag21_problem();
        let target = Vector::new(vec![0.0, 1.0]).unwrap();
        let mut z = Vector::new(vec![1.0, 1.0]).unwrap();
        rk_step(&mut z, p.a(), &target, 1).unwrap();
        assert_eq!(z.as_slice(), &[1.0, 1.0]);
        rk_step(&mut z, p.a(), &target, 0).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn regs_step_composes_the_two_updates() {
        // From x = z = (1, 1) with column 0 then row 1: x' = (0, 1) as in the
        // RGS test, and row 1 leaves z untouched.
        let p = diag21_problem();
        let mut state = RegsState {
            inner: RgsState::start(p.a(), Vector::new(vec![1.0, 1.0]).unwrap()).unwrap(),
            z: Vector::new(vec![1.0, 1.0]).unwrap(),
        };
        regs_step(&mut state, p.a(), p.b(), 0, 1).unwrap();
        assert_eq!(state.inner.x.as_slice(), &[0.0, 1.0]);
        assert_eq!(state.z.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn zero_column_and_row_are_rejected_by_kernels() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let b = Vector::zeros(2);
        let mut state = RgsState::start(&a, Vector::zeros(2)).unwrap();
        assert!(matches!(
            rgs_step(&mut state, &a, &b, 1),
            Err(SolveError::ZeroColumn(1))
        ));
        let mut z = Vector::zeros(2);
        assert!(matches!(
            rk_step(&mut z, &a, &Vector::zeros(2), 1),
            Err(SolveError::ZeroRow(1))
        ));
    }

    #[test]
    fn run_with_zero_iterations_returns_the_initial_state() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(5, 3, 1)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 2, RhsMode::Consistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let config = SolverConfig::new(Method::Rgs, 0, 7);
        let mut trace_ks = Vec::new();
        let out = run(&p, &config, 0, Initial::default(), |v| trace_ks.push(v.k)).unwrap();
        assert_eq!(trace_ks, vec![0]);
        assert_eq!(out.x.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn traces_fire_on_the_documented_grid() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(5, 3, 1)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 2, RhsMode::Consistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let mut config = SolverConfig::new(Method::Rgs, 25, 7);
        config.trace_every = 10;
        let mut ks = Vec::new();
        run(&p, &config, 0, Initial::default(), |v| ks.push(v.k)).unwrap();
        assert_eq!(ks, vec![0, 10, 20, 25]);
    }

    #[test]
    fn identical_seeds_replay_identical_traces() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(8, 5, 6)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 3, RhsMode::GaussianInconsistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let mut config = SolverConfig::new(Method::Regs, 200, 11);
        config.trace_every = 1;
        let capture = |cfg: &SolverConfig| {
            let mut xs: Vec<Vec<u64>> = Vec::new();
            run(&p, cfg, 5, Initial::default(), |v| {
                xs.push(
                    v.z.unwrap()
                        .as_slice()
                        .iter()
                        .map(|x| x.to_bits())
                        .collect(),
                );
            })
            .unwrap();
            xs
        };
        assert_eq!(capture(&config), capture(&config));
        // A different trial id gives a different trajectory.
        let mut other = Vec::new();
        run(&p, &config, 6, Initial::default(), |v| {
            other.push(v.z.unwrap().as_slice().iter().map(|x| x.to_bits()).collect());
        })
        .unwrap();
        assert_ne!(capture(&config), other as Vec<Vec<u64>>);
    }

    #[test]
    fn rgs_converges_on_a_consistent_full_rank_problem() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(20, 10, 9)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 13, RhsMode::Consistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let config = SolverConfig::new(Method::Rgs, 4000, 3);
        let out = run(&p, &config, 0, Initial::default(), |_| {}).unwrap();
        let err = out.x.sub(p.x_star()).norm();
        assert!(err <= 1e-6 * p.x_star().norm(), "final error {err}");
    }

    #[test]
    fn regs_z_converges_where_plain_rgs_x_does_not() {
        // Rank-deficient 30x40 problem: x has a persistent null-space
        // component when started away from the row space, while z (which
        // lives in the row space by construction) still converges.
        let spectrum: Vec<f64> = (0..26).map(|l| 2.0 - 0.05 * l as f64).collect();
        let (a, _) = testgen::planted_spectrum_matrix_with(30, 40, 17, &spectrum);
        let (b, _) = testgen::make_rhs(&a, 21, RhsMode::GaussianInconsistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let mut rng = RngStream::new(99, 0);
        let x0 = Vector::from_raw((0..40).map(|_| rng.next_gaussian()).collect());

        let trials = 8;
        let iters = 5000;
        let mut mean_z0 = 0.0;
        let mut mean_zk = 0.0;
        let mut mean_xk = 0.0;
        for t in 0..trials {
            let config = SolverConfig::new(Method::Regs, iters, 31);
            let out = run(
                &p,
                &config,
                t,
                Initial {
                    x0: Some(x0.clone()),
                    z0: None,
                },
                |_| {},
            )
            .unwrap();
            mean_z0 += p.x_star().norm();
            mean_zk += out.z.unwrap().sub(p.x_star()).norm();
            mean_xk += out.x.sub(p.x_star()).norm();
        }
        mean_z0 /= trials as f64;
        mean_zk /= trials as f64;
        mean_xk /= trials as f64;
        assert!(
            mean_zk <= mean_z0 / 10.0,
            "z error only moved {mean_z0} -> {mean_zk}"
        );
        // x keeps its null-space offset.
        assert!(mean_xk >= 0.1, "x unexpectedly converged: {mean_xk}");
    }

    #[test]
    fn initial_z_outside_the_row_space_is_rejected() {
        let spectrum = vec![2.0, 1.0];
        let (a, _) = testgen::planted_spectrum_matrix_with(4, 5, 3, &spectrum);
        let (b, _) = testgen::make_rhs(&a, 2, RhsMode::Consistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        // A generic vector has a null-space component for rank 2 in R^5.
        let mut rng = RngStream::new(55, 0);
        let z0 = Vector::from_raw((0..5).map(|_| rng.next_gaussian()).collect());
        let config = SolverConfig::new(Method::Regs, 10, 1);
        let err = run(
            &p,
            &config,
            0,
            Initial {
                x0: None,
                z0: Some(z0),
            },
            |_| {},
        );
        assert!(matches!(err, Err(SolveError::InitialZOutsideRowSpace(_))));
        // A row-space vector (a scaled matrix row) passes.
        let z_ok = {
            let mut z = Vector::zeros(5);
            p.a().row_axpy(0, 1.0, &mut z);
            z
        };
        assert!(run(
            &p,
            &config,
            0,
            Initial {
                x0: None,
                z0: Some(z_ok),
            },
            |_| {},
        )
        .is_ok());
    }

    #[test]
    fn rk_solves_consistent_systems() {
        let a = testgen::build_matrix(&MatrixSpec::gaussian(20, 10, 2)).unwrap();
        let (b, _) = testgen::make_rhs(&a, 5, RhsMode::Consistent).unwrap();
        let p = LsqProblem::new(a, b).unwrap();
        let config = SolverConfig::new(Method::Rk, 4000, 23);
        let out = run(&p, &config, 0, Initial::default(), |_| {}).unwrap();
        let err = out.x.sub(p.x_star()).norm();
        assert!(err <= 1e-6 * p.x_star().norm(), "final error {err}");
    }
}
