//! Seeded problem generators: Gaussian matrices, the near-singular
//! normalized-row family used by the alignment experiments, fixed-spectrum
//! matrices with known factors, and right-hand sides in three consistency
//! modes.
//!
//! Generation is a pure function of the `MatrixSpec`; the same description
//! always yields the same bytes. Stream ids below partition the seed space so
//! that matrix entries, planted solutions and noise never share draws.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{matvec, svd, DenseMatrix, LinalgError, Vector};
use crate::sampling::derive_stream;

const STREAM_MATRIX: u64 = 0;
const STREAM_FACTOR_U: u64 = 1;
const STREAM_FACTOR_V: u64 = 2;
const STREAM_RHS_X: u64 = 10;
const STREAM_RHS_NOISE: u64 = 11;

/// The full-size near-singular experiment matrices are fixed shapes.
pub const PAPER_A1_SHAPE: (usize, usize) = (600, 500);
pub const PAPER_A2_SHAPE: (usize, usize) = (500, 600);
const PAPER_SHIFT: f64 = 100.0;
const PAPER_PERTURB: f64 = 0.01;

#[derive(Debug, Error)]
pub enum TestgenError {
    #[error("matrix kind {kind:?} requires shape {expected:?}, got ({m}, {n})")]
    WrongShape {
        kind: MatrixKind,
        expected: (usize, usize),
        m: usize,
        n: usize,
    },
    #[error("the near-singular recipe needs a core of at least 2x2, got {0}")]
    CoreTooSmall(usize),
    #[error("explicit_spectrum requires a spectrum")]
    MissingSpectrum,
    #[error("spectrum must be nonnegative, nonincreasing and at most min(m, n) long: {reason}")]
    BadSpectrum { reason: String },
    #[error("random orthonormal basis generation degenerated (seed collision)")]
    DegenerateBasis,
    #[error("null space of A^T is trivial; cannot build a null-space residual")]
    TrivialNullSpace,
    #[error("planted solution has zero image; cannot scale the residual")]
    ZeroImage,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Matrix families understood by [`build_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// i.i.d. standard Gaussian entries.
    Gaussian,
    /// Full-scale 600x500 near-singular family: normalized-row shifted
    /// Gaussian core on top, zero rows below.
    PaperA1,
    /// Full-scale 500x600 variant: the same core with zero columns appended.
    PaperA2,
    /// The near-singular recipe at arbitrary shape: `m >= n` pads with zero
    /// rows (a1-style), `m < n` pads with zero columns (a2-style).
    ScaledPaper,
    /// `U diag(spectrum) V^T` with seeded random orthonormal factors.
    ExplicitSpectrum,
}

/// Declarative description of a generated matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Diagonal shift of the near-singular core (scaled_paper only; the
    /// full-size kinds pin it to 100).
    #[serde(default = "default_shift")]
    pub shift: f64,
    /// Entrywise perturbation applied when duplicating the core's last row.
    #[serde(default = "default_perturb")]
    pub perturb: f64,
    /// Planted singular values for `explicit_spectrum`.
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
}

fn default_shift() -> f64 {
    20.0
}

fn default_perturb() -> f64 {
    0.01
}

impl MatrixSpec {
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: MatrixKind::Gaussian,
            m,
            n,
            seed,
            shift: default_shift(),
            perturb: default_perturb(),
            spectrum: None,
        }
    }

    pub fn scaled_paper(m: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: MatrixKind::ScaledPaper,
            ..Self::gaussian(m, n, seed)
        }
    }

    pub fn explicit_spectrum(m: usize, n: usize, seed: u64, spectrum: Vec<f64>) -> Self {
        Self {
            kind: MatrixKind::ExplicitSpectrum,
            spectrum: Some(spectrum),
            ..Self::gaussian(m, n, seed)
        }
    }
}

/// Right-hand-side construction modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    /// `b = A x` for a seeded Gaussian `x`.
    Consistent,
    /// `b = A x + z` with `z` in the null space of `A^T`, scaled so that
    /// `||z|| = 0.1 ||A x||`.
    NullspaceInconsistent,
    /// `b = A x + g` with seeded Gaussian noise scaled to `0.1 ||A x||`.
    GaussianInconsistent,
}

/// Builds the matrix described by `spec`.
pub fn build_matrix(spec: &MatrixSpec) -> Result<DenseMatrix, TestgenError> {
    match spec.kind {
        MatrixKind::Gaussian => Ok(gaussian_matrix(spec.m, spec.n, spec.seed)),
        MatrixKind::PaperA1 => {
            check_shape(spec, PAPER_A1_SHAPE)?;
            near_singular_padded(spec.m, spec.n, PAPER_SHIFT, PAPER_PERTURB, spec.seed)
        }
        MatrixKind::PaperA2 => {
            check_shape(spec, PAPER_A2_SHAPE)?;
            near_singular_padded(spec.m, spec.n, PAPER_SHIFT, PAPER_PERTURB, spec.seed)
        }
        MatrixKind::ScaledPaper => {
            near_singular_padded(spec.m, spec.n, spec.shift, spec.perturb, spec.seed)
        }
        MatrixKind::ExplicitSpectrum => {
            let spectrum = spec.spectrum.as_ref().ok_or(TestgenError::MissingSpectrum)?;
            let (a, _, _) = explicit_spectrum_factors(spec.m, spec.n, spec.seed, spectrum)?;
            Ok(a)
        }
    }
}

fn check_shape(spec: &MatrixSpec, expected: (usize, usize)) -> Result<(), TestgenError> {
    if (spec.m, spec.n) != expected {
        return Err(TestgenError::WrongShape {
            kind: spec.kind,
            expected,
            m: spec.m,
            n: spec.n,
        });
    }
    Ok(())
}

fn gaussian_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = derive_stream(seed, STREAM_MATRIX);
    let data = (0..m * n).map(|_| rng.next_gaussian()).collect();
    DenseMatrix::from_raw(m, n, data)
}

/// The near-singular core: a square shifted Gaussian whose last row is
/// replaced by an entrywise perturbation of the row above it, then every row
/// is normalized to unit 2-norm. The perturbation happens before the
/// normalization, so the two trailing rows are nearly parallel and one
/// singular value collapses to roughly `perturb`-over-row-norm scale.
fn near_singular_core(
    s: usize,
    shift: f64,
    perturb: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>, TestgenError> {
    if s < 2 {
        return Err(TestgenError::CoreTooSmall(s));
    }
    let mut rng = derive_stream(seed, STREAM_MATRIX);
    let mut rows: Vec<Vec<f64>> = (0..s)
        .map(|_| (0..s).map(|_| rng.next_gaussian()).collect())
        .collect();
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] += shift;
    }
    rows[s - 1] = rows[s - 2].iter().map(|x| x + perturb).collect();
    for row in &mut rows {
        let nrm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        debug_assert!(nrm > 0.0);
        for x in row.iter_mut() {
            *x /= nrm;
        }
    }
    Ok(rows)
}

/// Core of size `min(m, n)` padded with zero rows (`m >= n`) or zero columns
/// (`m < n`) to the requested shape.
fn near_singular_padded(
    m: usize,
    n: usize,
    shift: f64,
    perturb: f64,
    seed: u64,
) -> Result<DenseMatrix, TestgenError> {
    let s = m.min(n);
    let core = near_singular_core(s, shift, perturb, seed)?;
    let mut a = DenseMatrix::zeros(m, n);
    for (i, row) in core.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            a.set(i, j, x);
        }
    }
    Ok(a)
}

/// Builds `A = U diag(spectrum) V^T` and returns the factors along with the
/// matrix, so tests can check results against the planted decomposition.
pub fn explicit_spectrum_factors(
    m: usize,
    n: usize,
    seed: u64,
    spectrum: &[f64],
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix), TestgenError> {
    validate_spectrum(spectrum, m.min(n))?;
    let u = random_orthonormal(m, seed, STREAM_FACTOR_U)?;
    let v = random_orthonormal(n, seed, STREAM_FACTOR_V)?;
    let mut data = vec![0.0; m * n];
    for (l, &s) in spectrum.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for i in 0..m {
            let ui = s * u.get(i, l);
            for j in 0..n {
                data[i * n + j] += ui * v.get(j, l);
            }
        }
    }
    Ok((DenseMatrix::from_raw(m, n, data), u, v))
}

fn validate_spectrum(spectrum: &[f64], max_len: usize) -> Result<(), TestgenError> {
    if spectrum.len() > max_len {
        return Err(TestgenError::BadSpectrum {
            reason: format!("length {} exceeds min(m, n) = {max_len}", spectrum.len()),
        });
    }
    for w in spectrum.windows(2) {
        if w[1] > w[0] {
            return Err(TestgenError::BadSpectrum {
                reason: format!("increasing pair ({}, {})", w[0], w[1]),
            });
        }
    }
    if spectrum.iter().any(|&s| !s.is_finite() || s < 0.0) {
        return Err(TestgenError::BadSpectrum {
            reason: "negative or non-finite entry".into(),
        });
    }
    Ok(())
}

/// Seeded random orthonormal square matrix: Gaussian columns put through two
/// rounds of Gram-Schmidt.
fn random_orthonormal(dim: usize, seed: u64, stream: u64) -> Result<DenseMatrix, TestgenError> {
    let mut rng = derive_stream(seed, stream);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        for _ in 0..2 {
            for b in &cols {
                let proj: f64 = b.iter().zip(&v).map(|(bi, vi)| bi * vi).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            return Err(TestgenError::DegenerateBasis);
        }
        for x in &mut v {
            *x /= nrm;
        }
        cols.push(v);
    }
    let mut data = vec![0.0; dim * dim];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * dim + j] = x;
        }
    }
    Ok(DenseMatrix::from_raw(dim, dim, data))
}

/// Convenience for tests: an `m x n` matrix with the default geometric test
/// spectrum `2.0 * 0.8^l`, returned together with that spectrum.
pub fn planted_spectrum_matrix(m: usize, n: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
    let spectrum: Vec<f64> = (0..m.min(n)).map(|l| 2.0 * 0.8f64.powi(l as i32)).collect();
    let (a, _) = planted_spectrum_matrix_with(m, n, seed, &spectrum);
    (a, spectrum)
}

/// Same, with a caller-provided spectrum.
pub fn planted_spectrum_matrix_with(
    m: usize,
    n: usize,
    seed: u64,
    spectrum: &[f64],
) -> (DenseMatrix, Vec<f64>) {
    let (a, _, _) = explicit_spectrum_factors(m, n, seed, spectrum)
        .expect("valid planted spectrum");
    (a, spectrum.to_vec())
}

/// Builds `(b, x_planted)` for the matrix under the requested mode. The
/// planted solution is a seeded Gaussian vector; inconsistent modes add a
/// residual scaled to one tenth of `||A x||`.
pub fn make_rhs(
    a: &DenseMatrix,
    x_seed: u64,
    mode: RhsMode,
) -> Result<(Vector, Vector), TestgenError> {
    let mut rng = derive_stream(x_seed, STREAM_RHS_X);
    let x = Vector::from_raw((0..a.cols()).map(|_| rng.next_gaussian()).collect());
    let ax = matvec(a, &x)?;
    match mode {
        RhsMode::Consistent => Ok((ax, x)),
        RhsMode::GaussianInconsistent => {
            let image_norm = ax.norm();
            if image_norm == 0.0 {
                return Err(TestgenError::ZeroImage);
            }
            let mut noise_rng = derive_stream(x_seed, STREAM_RHS_NOISE);
            let mut g = Vector::from_raw((0..a.rows()).map(|_| noise_rng.next_gaussian()).collect());
            g.scale(0.1 * image_norm / g.norm());
            Ok((ax.add(&g), x))
        }
        RhsMode::NullspaceInconsistent => {
            let image_norm = ax.norm();
            if image_norm == 0.0 {
                return Err(TestgenError::ZeroImage);
            }
            let f = svd(a)?;
            if f.rank() == a.rows() {
                return Err(TestgenError::TrivialNullSpace);
            }
            let mut noise_rng = derive_stream(x_seed, STREAM_RHS_NOISE);
            let mut z = Vector::from_raw((0..a.rows()).map(|_| noise_rng.next_gaussian()).collect());
            // Remove the column-space component, leaving z in null(A^T).
            for l in 0..f.rank() {
                let coef = f.u().col_dot(l, &z);
                f.u().col_axpy(l, -coef, &mut z);
            }
            let nrm = z.norm();
            if nrm <= 1e-12 * image_norm {
                return Err(TestgenError::TrivialNullSpace);
            }
            z.scale(0.1 * image_norm / nrm);
            Ok((ax.add(&z), x))
        }
    }
}
