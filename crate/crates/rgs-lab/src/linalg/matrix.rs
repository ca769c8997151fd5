//! Row-major dense matrix and vector types.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("entry buffer of length {found} does not match {rows}x{cols}")]
    BadBufferLength {
        rows: usize,
        cols: usize,
        found: usize,
    },
    #[error("matrix dimensions must be positive")]
    EmptyDimension,
    #[error("one-sided Jacobi SVD did not converge within {sweeps} sweeps")]
    SvdNonConvergence { sweeps: usize },
}

/// Dense column vector. All entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    /// Wraps `data`, rejecting NaN and infinities.
    pub fn new(data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite("vector entries"));
        }
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    /// Internal constructor for values produced by our own arithmetic.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Vector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, xi) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * xi;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps a row-major entry buffer, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadBufferLength {
                rows,
                cols,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a slice of rows; handy in tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(LinalgError::EmptyDimension);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::BadBufferLength {
                    rows: rows.len(),
                    cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Contiguous view of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Dot product of column `j` with `v` (length `rows`).
    pub fn col_dot(&self, j: usize, v: &Vector) -> f64 {
        debug_assert_eq!(v.len(), self.rows);
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += self.data[i * self.cols + j] * v[i];
        }
        acc
    }

    /// Dot product of column `j` of `self` with column `jo` of `other`.
    pub fn col_col_dot(&self, j: usize, other: &DenseMatrix, jo: usize) -> f64 {
        debug_assert_eq!(self.rows, other.rows);
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += self.data[i * self.cols + j] * other.data[i * other.cols + jo];
        }
        acc
    }

    /// `out += alpha * column_j` (length `rows`).
    pub fn col_axpy(&self, j: usize, alpha: f64, out: &mut Vector) {
        debug_assert_eq!(out.len(), self.rows);
        for i in 0..self.rows {
            out[i] += alpha * self.data[i * self.cols + j];
        }
    }

    /// Copy of column `j`.
    pub fn col(&self, j: usize) -> Vector {
        Vector::from_raw((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    /// Dot product of row `i` with `v` (length `cols`).
    pub fn row_dot(&self, i: usize, v: &Vector) -> f64 {
        debug_assert_eq!(v.len(), self.cols);
        self.row(i)
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `out += alpha * row_i^T` (length `cols`).
    pub fn row_axpy(&self, i: usize, alpha: f64, out: &mut Vector) {
        debug_assert_eq!(out.len(), self.cols);
        for (o, a) in out.data.iter_mut().zip(self.row(i)) {
            *o += alpha * a;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMatrix::from_raw(self.cols, self.rows, data)
    }

    /// Squared 2-norm of every column.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut norms = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, n) in norms.iter_mut().enumerate() {
                let v = self.data[i * self.cols + j];
                *n += v * v;
            }
        }
        norms
    }

    /// Squared 2-norm of every row.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x * x).sum())
            .collect()
    }

    /// Squared Frobenius norm, summed directly over the entry buffer.
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

/// `A * x`; errors on shape mismatch.
pub fn matvec(a: &DenseMatrix, x: &Vector) -> Result<Vector, LinalgError> {
    if x.len() != a.cols() {
        return Err(LinalgError::DimensionMismatch {
            context: "matvec",
            expected: a.cols(),
            found: x.len(),
        });
    }
    Ok(Vector::from_raw(
        (0..a.rows()).map(|i| a.row_dot(i, x)).collect(),
    ))
}

/// `A^T * y`; errors on shape mismatch.
pub fn matvec_t(a: &DenseMatrix, y: &Vector) -> Result<Vector, LinalgError> {
    if y.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            context: "matvec_t",
            expected: a.rows(),
            found: y.len(),
        });
    }
    let mut out = Vector::zeros(a.cols());
    for i in 0..a.rows() {
        a.row_axpy(i, y[i], &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::new(seed, 0);
        DenseMatrix::from_raw(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.next_gaussian()).collect(),
        )
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(Vector::new(vec![1.0, -2.5]).is_ok());
    }

    #[test]
    fn matrix_rejects_bad_shapes() {
        assert!(matches!(
            DenseMatrix::new(0, 3, vec![]),
            Err(LinalgError::EmptyDimension)
        ));
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(LinalgError::BadBufferLength { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite(_))
        ));
    }

    #[test]
    fn matvec_shape_mismatch_is_an_error() {
        let a = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            matvec(&a, &Vector::zeros(3)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            matvec_t(&a, &Vector::zeros(2)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    // Oracle: accumulate x_j * col_j instead of row-by-row dot products.
    fn matvec_by_columns(a: &DenseMatrix, x: &Vector) -> Vector {
        let mut out = Vector::zeros(a.rows());
        for j in 0..a.cols() {
            a.col_axpy(j, x[j], &mut out);
        }
        out
    }

    #[test]
    fn matvec_matches_column_accumulation_oracle() {
        for seed in 0..20 {
            let a = random_matrix(7, 5, seed);
            let mut rng = RngStream::new(seed, 1);
            let x = Vector::from_raw((0..5).map(|_| rng.next_gaussian()).collect());
            let y = matvec(&a, &x).unwrap();
            let oracle = matvec_by_columns(&a, &x);
            for i in 0..7 {
                assert!(
                    (y[i] - oracle[i]).abs() <= 1e-14 * (1.0 + oracle[i].abs()),
                    "row {i}: {} vs {}",
                    y[i],
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn norm_helpers_agree() {
        for seed in 0..10 {
            let a = random_matrix(6, 4, seed);
            let by_cols: f64 = a.column_sq_norms().iter().sum();
            let by_rows: f64 = a.row_sq_norms().iter().sum();
            let direct = a.frob_sq();
            assert!((by_cols - direct).abs() <= 1e-12 * direct.max(1.0));
            assert!((by_rows - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn transpose_round_trips() {
        let a = random_matrix(5, 3, 7);
        let att = a.transpose().transpose();
        assert_eq!(a, att);
    }

    #[test]
    fn row_and_col_accessors_match_get() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(a.row(1), &[3.0, 4.0]);
        assert_eq!(a.col(1).as_slice(), &[2.0, 4.0, 6.0]);
        assert_eq!(a.col_dot(0, &Vector::new(vec![1.0, 1.0, 1.0]).unwrap()), 9.0);
        assert_eq!(a.get(2, 0), 5.0);
    }
}
