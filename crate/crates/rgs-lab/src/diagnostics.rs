//! Trace quantities measured along solver trajectories, and Monte-Carlo
//! aggregation of those traces across independent trials.
//!
//! Each method is observed through the error vector its theory speaks about:
//! RGS through the image error `A x_k - A x*` (left singular basis), REGS
//! through the coefficient error `z_k - x*` (right singular basis), RK
//! through `x_k - x*` (right basis as well). Quantities that normalize by
//! the error norm are undefined at an exactly solved iterate; those points
//! are recorded with an `undefined` status and excluded from averages, with
//! the defined count reported alongside every statistic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{matvec, matvec_t, DenseMatrix, LsqProblem, Vector};
use crate::solvers::{self, Initial, IterateView, Method, SolverConfig};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("singular index ell = {ell} out of range 1..={rank}")]
    EllOutOfRange { ell: usize, rank: usize },
    #[error("quantity {0} needs a singular index")]
    MissingEll(&'static str),
    #[error("the iteration grid is empty")]
    EmptyKGrid,
}

/// A traced scalar. The projections are signed; `direction_projection` is
/// the squared cosine between the error and one singular direction, and
/// `rayleigh_ratio` is the norm ratio that the error's alignment drives
/// toward the smallest positive singular value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `<error, direction_ell>` in the method's native space.
    ProjectionSigned,
    /// `<A iterate - A x*, u_ell>`: the image-space projection, regardless
    /// of the native space. Coincides with `projection_signed` for RGS.
    ProjectionSignedImage,
    /// `||error||^2` in the native space.
    SqError,
    /// `<error, direction_ell>^2 / ||error||^2`; undefined at zero error.
    DirectionProjection,
    /// `||A^T w|| / ||w||` for an image-space error `w`, `||A d|| / ||d||`
    /// for a coefficient-space error `d`; undefined at zero error.
    RayleighRatio,
}

impl Quantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::ProjectionSigned => "projection_signed",
            Quantity::ProjectionSignedImage => "projection_signed_image",
            Quantity::SqError => "sq_error",
            Quantity::DirectionProjection => "direction_projection",
            Quantity::RayleighRatio => "rayleigh_ratio",
        }
    }

    /// Whether the quantity refers to a specific singular direction.
    pub fn needs_ell(&self) -> bool {
        matches!(
            self,
            Quantity::ProjectionSigned
                | Quantity::ProjectionSignedImage
                | Quantity::DirectionProjection
        )
    }
}

/// Outcome of measuring one quantity at one trace point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Ok,
    /// The quantity is not defined at this iterate (zero error vector).
    Undefined,
    /// The trial failed before producing data.
    Error,
}

impl TraceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceStatus::Ok => "ok",
            TraceStatus::Undefined => "undefined",
            TraceStatus::Error => "error",
        }
    }
}

/// One measured value: trial, iteration, quantity, optional 1-based singular
/// index, and the value (absent unless the status is `Ok`).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub trial: u64,
    pub k: usize,
    pub quantity: Quantity,
    pub ell: Option<usize>,
    pub value: Option<f64>,
    pub status: TraceStatus,
}

/// What to measure and where: a set of (quantity, direction) requests and a
/// sorted grid of iteration counts.
#[derive(Debug, Clone)]
pub struct TracePlan {
    requests: Vec<(Quantity, Option<usize>)>,
    k_grid: Vec<usize>,
}

impl TracePlan {
    /// Validates directions against the problem's rank, drops the direction
    /// from requests that ignore it, and sorts/dedups the grid.
    pub fn new(
        requests: Vec<(Quantity, Option<usize>)>,
        mut k_grid: Vec<usize>,
        problem: &LsqProblem,
    ) -> Result<Self, DiagnosticsError> {
        if k_grid.is_empty() {
            return Err(DiagnosticsError::EmptyKGrid);
        }
        k_grid.sort_unstable();
        k_grid.dedup();
        let rank = problem.rank();
        let mut normalized = Vec::with_capacity(requests.len());
        for (q, ell) in requests {
            if !q.needs_ell() {
                normalized.push((q, None));
                continue;
            }
            match ell {
                None => return Err(DiagnosticsError::MissingEll(q.as_str())),
                Some(l) if l == 0 || l > rank => {
                    return Err(DiagnosticsError::EllOutOfRange { ell: l, rank })
                }
                Some(l) => normalized.push((q, Some(l))),
            }
        }
        Ok(Self {
            requests: normalized,
            k_grid,
        })
    }

    pub fn requests(&self) -> &[(Quantity, Option<usize>)] {
        &self.requests
    }

    pub fn k_grid(&self) -> &[usize] {
        &self.k_grid
    }

    /// Largest grid point; the number of iterations a run must take.
    pub fn max_k(&self) -> usize {
        *self.k_grid.last().expect("grid is non-empty by construction")
    }

    fn contains_k(&self, k: usize) -> bool {
        self.k_grid.binary_search(&k).is_ok()
    }
}

/// Squared cosine between `err` and column `l` of an orthonormal `basis`;
/// `None` at zero error.
pub fn direction_projection(err: &Vector, basis: &DenseMatrix, l: usize) -> Option<f64> {
    let nsq = err.norm_sq();
    if nsq == 0.0 {
        return None;
    }
    let c = basis.col_dot(l, err);
    Some(c * c / nsq)
}

/// `||A^T w|| / ||w||` for an image-space error; `None` at zero error.
pub fn rayleigh_ratio_image(a: &DenseMatrix, w: &Vector) -> Option<f64> {
    let nsq = w.norm_sq();
    if nsq == 0.0 {
        return None;
    }
    let atw = matvec_t(a, w).expect("image error length matches the matrix");
    Some((atw.norm_sq() / nsq).sqrt())
}

/// `||A d|| / ||d||` for a coefficient-space error; `None` at zero error.
pub fn rayleigh_ratio_coef(a: &DenseMatrix, d: &Vector) -> Option<f64> {
    let nsq = d.norm_sq();
    if nsq == 0.0 {
        return None;
    }
    let ad = matvec(a, d).expect("coefficient error length matches the matrix");
    Some((ad.norm_sq() / nsq).sqrt())
}

/// The active error vector for one trace point and whether it lives in the
/// image space (`true`) or the coefficient space (`false`).
fn active_error(problem: &LsqProblem, method: Method, view: &IterateView<'_>) -> (Vector, bool) {
    match method {
        Method::Rgs => {
            let w = match view.ax {
                Some(w) => w.clone(),
                None => matvec(problem.a(), view.x).expect("iterate length fixed by the run"),
            };
            (w.sub(problem.ax_star()), true)
        }
        Method::Regs => {
            let z = view.z.expect("REGS runs always carry z");
            (z.sub(problem.x_star()), false)
        }
        Method::Rk => (view.x.sub(problem.x_star()), false),
    }
}

/// Measures one quantity at one iterate. `ell` is 1-based and must already
/// be validated (see [`TracePlan::new`]); `None` means the quantity ignores
/// it. Returns `None` where the quantity is undefined.
pub fn evaluate(
    problem: &LsqProblem,
    method: Method,
    view: &IterateView<'_>,
    quantity: Quantity,
    ell: Option<usize>,
) -> Option<f64> {
    let (err, image) = active_error(problem, method, view);
    let f = problem.svd();
    match quantity {
        Quantity::SqError => Some(err.norm_sq()),
        Quantity::ProjectionSigned => {
            let l = ell.expect("validated request") - 1;
            let basis = if image { f.u() } else { f.v() };
            Some(basis.col_dot(l, &err))
        }
        Quantity::ProjectionSignedImage => {
            let l = ell.expect("validated request") - 1;
            if image {
                Some(f.u().col_dot(l, &err))
            } else {
                let img = matvec(problem.a(), &err).expect("error length fixed by the run");
                Some(f.u().col_dot(l, &img))
            }
        }
        Quantity::DirectionProjection => {
            let l = ell.expect("validated request") - 1;
            let basis = if image { f.u() } else { f.v() };
            direction_projection(&err, basis, l)
        }
        Quantity::RayleighRatio => {
            if image {
                rayleigh_ratio_image(problem.a(), &err)
            } else {
                rayleigh_ratio_coef(problem.a(), &err)
            }
        }
    }
}

/// Runs `n_trials` independent trajectories (trial ids `trial_offset..`) and
/// measures every planned request at every grid point. Trials run in
/// parallel; the record order is by trial, then grid point, then request,
/// and is byte-for-byte reproducible for a fixed seed.
///
/// A trial that fails to start contributes one `Error`-status record per
/// request at `k = 0` instead of data.
pub fn collect_traces(
    problem: &LsqProblem,
    method: Method,
    master_seed: u64,
    init: &Initial,
    n_trials: usize,
    trial_offset: u64,
    plan: &TracePlan,
) -> Vec<TraceRecord> {
    let mut config = SolverConfig::new(method, plan.max_k(), master_seed);
    config.trace_every = 1;
    let per_trial: Vec<Vec<TraceRecord>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = trial_offset + t;
            let mut recs = Vec::with_capacity(plan.k_grid().len() * plan.requests().len());
            let result = solvers::run(problem, &config, trial, init.clone(), |view| {
                if !plan.contains_k(view.k) {
                    return;
                }
                for &(quantity, ell) in plan.requests() {
                    let value = evaluate(problem, method, &view, quantity, ell);
                    recs.push(TraceRecord {
                        trial,
                        k: view.k,
                        quantity,
                        ell,
                        value,
                        status: if value.is_some() {
                            TraceStatus::Ok
                        } else {
                            TraceStatus::Undefined
                        },
                    });
                }
            });
            if result.is_err() {
                recs = plan
                    .requests()
                    .iter()
                    .map(|&(quantity, ell)| TraceRecord {
                        trial,
                        k: 0,
                        quantity,
                        ell,
                        value: None,
                        status: TraceStatus::Error,
                    })
                    .collect();
            }
            recs
        })
        .collect();
    per_trial.into_iter().flatten().collect()
}

/// Per-grid-point summary of one quantity across trials. `mean` and
/// `std_err` are computed over the `defined` values only; `std_err` is the
/// sample standard deviation (n - 1 in the denominator) over the square
/// root of the defined count, absent when fewer than two values are defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStat {
    pub k: usize,
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
    pub defined: usize,
    pub trials: usize,
}

/// Groups records matching `(quantity, ell)` by grid point and reduces each
/// group to a [`KStat`].
pub fn summarize(
    records: &[TraceRecord],
    quantity: Quantity,
    ell: Option<usize>,
    k_grid: &[usize],
) -> Vec<KStat> {
    k_grid
        .iter()
        .map(|&k| {
            let values = defined_values_at(records, quantity, ell, k);
            let trials = records
                .iter()
                .filter(|r| {
                    r.quantity == quantity
                        && r.ell == ell
                        && r.k == k
                        && r.status != TraceStatus::Error
                })
                .count();
            let defined = values.len();
            let mean = if defined > 0 {
                Some(values.iter().sum::<f64>() / defined as f64)
            } else {
                None
            };
            let std_err = if defined >= 2 {
                let m = mean.expect("defined > 0");
                let var =
                    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (defined - 1) as f64;
                Some((var / defined as f64).sqrt())
            } else {
                None
            };
            KStat {
                k,
                mean,
                std_err,
                defined,
                trials,
            }
        })
        .collect()
}

/// All defined values of `(quantity, ell)` at grid point `k`, in trial order.
pub fn defined_values_at(
    records: &[TraceRecord],
    quantity: Quantity,
    ell: Option<usize>,
    k: usize,
) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.quantity == quantity && r.ell == ell && r.k == k)
        .filter_map(|r| r.value)
        .collect()
}

/// Median of a sample; the mean of the two middle order statistics for even
/// lengths, `None` for an empty sample.
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("trace values are finite"));
    let n = values.len();
    if n % 2 == 1 {
        Some(values[n / 2])
    } else {
        Some(0.5 * (values[n / 2 - 1] + values[n / 2]))
    }
}

/// Runs a fresh Monte-Carlo estimate of one quantity: `n_trials` trajectories
/// summarized at each grid point.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    problem: &LsqProblem,
    method: Method,
    master_seed: u64,
    init: &Initial,
    n_trials: usize,
    trial_offset: u64,
    quantity: Quantity,
    ell: Option<usize>,
    k_grid: &[usize],
) -> Result<Vec<KStat>, DiagnosticsError> {
    let plan = TracePlan::new(vec![(quantity, ell)], k_grid.to_vec(), problem)?;
    let records = collect_traces(
        problem,
        method,
        master_seed,
        init,
        n_trials,
        trial_offset,
        &plan,
    );
    let (q, ell_norm) = plan.requests()[0];
    Ok(summarize(&records, q, ell_norm, plan.k_grid()))
}
