//! Full singular value decomposition via one-sided Jacobi rotations.
//!
//! The factorization drives everything downstream that talks about singular
//! directions, so it is computed to near machine precision: sweeps of plane
//! rotations orthogonalize the columns of a working copy of `A`, the same
//! rotations accumulate into `V`, surviving column norms become the singular
//! values, and the left factor is completed to a full orthonormal basis of
//! R^m so that projections onto trailing directions are always available.

use super::matrix::{DenseMatrix, LinalgError, Vector};

/// Relative cutoff (against the largest singular value) below which a
/// singular value is not counted toward the rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Hard sweep limit; dense matrices at the sizes this crate handles converge
/// in well under this many sweeps, so hitting it signals a genuine problem.
const MAX_SWEEPS: usize = 60;

/// A pair of columns counts as orthogonal when their inner product is below
/// this multiple of the product of their norms.
const PAIR_TOL: f64 = 1e-14;

/// Full SVD `A = U diag(sigma) V^T` with square orthonormal factors.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    u: DenseMatrix,
    sigma: Vec<f64>,
    v: DenseMatrix,
    rank: usize,
    rank_tol: f64,
}

impl SvdFactorization {
    /// Left singular vectors as the columns of an `m x m` orthonormal matrix.
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    /// Singular values, nonincreasing, length `min(m, n)`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Right singular vectors as the columns of an `n x n` orthonormal matrix.
    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// Number of singular values above `rank_tol * sigma_max`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `ell`-th singular value, 1-based (`ell = 1` is the largest).
    pub fn sigma_at(&self, ell: usize) -> f64 {
        self.sigma[ell - 1]
    }

    /// Copy of the `ell`-th left singular vector, 1-based.
    pub fn u_col(&self, ell: usize) -> Vector {
        self.u.col(ell - 1)
    }

    /// Copy of the `ell`-th right singular vector, 1-based.
    pub fn v_col(&self, ell: usize) -> Vector {
        self.v.col(ell - 1)
    }

    /// Smallest singular value counted toward the rank, i.e. `sigma_r`.
    /// Returns `None` for the zero matrix.
    pub fn sigma_min_positive(&self) -> Option<f64> {
        if self.rank == 0 {
            None
        } else {
            Some(self.sigma[self.rank - 1])
        }
    }

    /// Rebuilds `sum_l sigma_l u_l v_l^T`; used by reconstruction tests.
    pub fn reconstruct(&self) -> DenseMatrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let mut data = vec![0.0; m * n];
        for (l, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let ui = s * self.u.get(i, l);
                for j in 0..n {
                    data[i * n + j] += ui * self.v.get(j, l);
                }
            }
        }
        DenseMatrix::from_raw(m, n, data)
    }
}

/// SVD with the default rank cutoff.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactorization, LinalgError> {
    svd_with_tol(a, DEFAULT_RANK_TOL)
}

/// SVD with an explicit relative rank cutoff.
pub fn svd_with_tol(a: &DenseMatrix, rank_tol: f64) -> Result<SvdFactorization, LinalgError> {
    if a.rows() >= a.cols() {
        factor_tall(a, rank_tol)
    } else {
        // Factor the transpose and swap the roles of the factors:
        // A^T = U' S V'^T  implies  A = V' S U'^T.
        let f = factor_tall(&a.transpose(), rank_tol)?;
        Ok(SvdFactorization {
            u: f.v,
            sigma: f.sigma,
            v: f.u,
            rank: f.rank,
            rank_tol: f.rank_tol,
        })
    }
}

/// One-sided Jacobi on a matrix with `rows >= cols`.
fn factor_tall(a: &DenseMatrix, rank_tol: f64) -> Result<SvdFactorization, LinalgError> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);

    let frob = a.frob_sq().sqrt();
    if frob == 0.0 {
        return Ok(SvdFactorization {
            u: DenseMatrix::identity(m),
            sigma: vec![0.0; n],
            v: DenseMatrix::identity(n),
            rank: 0,
            rank_tol,
        });
    }

    // Working copy of A stored as columns, plus the accumulated rotations.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    let mut v_cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    // Absolute floor keeps denormal-scale inner products from stalling the
    // relative test once columns have collapsed to zero.
    let abs_floor = (PAIR_TOL * frob) * (PAIR_TOL * frob);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for (&cp, &cq) in cols[p].iter().zip(&cols[q]) {
                    app += cp * cp;
                    aqq += cq * cq;
                    apq += cp * cq;
                }
                if apq.abs() <= (PAIR_TOL * (app * aqq).sqrt()).max(abs_floor) {
                    continue;
                }
                // Jacobi rotation that zeroes the (p, q) entry of B^T B.
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v_cols, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::SvdNonConvergence { sweeps: MAX_SWEEPS });
    }

    // Sort by descending column norm; ties keep their original order.
    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma[0];

    // Normalized columns are reliable left vectors only while the norm is
    // comfortably above rounding noise; the rest of U comes from completion.
    let u_reliable = sigma_max * (m.max(n) as f64) * f64::EPSILON;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &j in &order {
        if norms[j] > u_reliable {
            let inv = 1.0 / norms[j];
            u_cols.push(cols[j].iter().map(|x| x * inv).collect());
        }
    }
    complete_orthonormal_basis(&mut u_cols, m)?;

    let rank = sigma.iter().take_while(|&&s| s > rank_tol * sigma_max).count();

    Ok(SvdFactorization {
        u: columns_to_matrix(&u_cols, m),
        sigma,
        v: columns_to_matrix(&order.iter().map(|&j| v_cols[j].clone()).collect::<Vec<_>>(), n),
        rank,
        rank_tol,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let new_p = c * *xp - s * *xq;
        let new_q = s * *xp + c * *xq;
        *xp = new_p;
        *xq = new_q;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Extends `basis` (orthonormal columns of length `dim`) to `dim` vectors by
/// orthogonalizing standard basis vectors against it. A candidate is accepted
/// once its residual norm is safely above rounding; at least one candidate
/// per pass qualifies while the basis is incomplete.
fn complete_orthonormal_basis(basis: &mut Vec<Vec<f64>>, dim: usize) -> Result<(), LinalgError> {
    let accept_sq = 1.0 / (2.0 * dim as f64);
    while basis.len() < dim {
        let mut appended = false;
        for cand in 0..dim {
            let mut v = vec![0.0; dim];
            v[cand] = 1.0;
            // Two Gram-Schmidt passes for numerical orthogonality.
            for _ in 0..2 {
                for b in basis.iter() {
                    let proj: f64 = b.iter().zip(&v).map(|(bi, vi)| bi * vi).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= proj * bi;
                    }
                }
            }
            let nrm_sq: f64 = v.iter().map(|x| x * x).sum();
            if nrm_sq >= accept_sq {
                let inv = 1.0 / nrm_sq.sqrt();
                for x in &mut v {
                    *x *= inv;
                }
                basis.push(v);
                appended = true;
                break;
            }
        }
        if !appended {
            // Mathematically unreachable: some standard basis vector always
            // has residual norm^2 >= (dim - len) / dim.
            return Err(LinalgError::NonFinite("orthonormal completion"));
        }
    }
    Ok(())
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> DenseMatrix {
    let n = cols.len();
    let mut data = vec![0.0; rows * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * n + j] = x;
        }
    }
    DenseMatrix::from_raw(rows, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matvec;
    use crate::sampling::RngStream;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::new(seed, 0);
        DenseMatrix::from_raw(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.next_gaussian()).collect(),
        )
    }

    fn max_abs_off_identity(g: &DenseMatrix) -> f64 {
        let n = g.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    fn gram(a: &DenseMatrix) -> DenseMatrix {
        let n = a.cols();
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g.set(i, j, a.col_col_dot(i, a, j));
            }
        }
        g
    }

    fn check_factorization(a: &DenseMatrix, f: &SvdFactorization) {
        let scale = a.frob_sq().sqrt().max(1.0);
        assert!(max_abs_off_identity(&gram(f.u())) <= 1e-10, "U not orthonormal");
        assert!(max_abs_off_identity(&gram(f.v())) <= 1e-10, "V not orthonormal");
        for w in f.sigma().windows(2) {
            assert!(w[0] >= w[1], "sigma not nonincreasing: {:?}", f.sigma());
        }
        assert!(f.sigma().iter().all(|&s| s >= 0.0));
        let recon = f.reconstruct();
        let mut err = 0.0;
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                err += (a.get(i, j) - recon.get(i, j)).powi(2);
            }
        }
        assert!(
            err.sqrt() <= 1e-10 * scale,
            "reconstruction error {} vs scale {scale}",
            err.sqrt()
        );
    }

    #[test]
    fn diagonal_matrix_has_known_factorization() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = svd(&a).unwrap();
        assert_eq!(f.sigma(), &[2.0, 1.0]);
        assert_eq!(f.rank(), 2);
        // Singular vectors are +/- standard basis vectors.
        assert!((f.u_col(1)[0].abs() - 1.0).abs() < 1e-14);
        assert!(f.u_col(1)[1].abs() < 1e-14);
        check_factorization(&a, &f);
    }

    #[test]
    fn zero_matrix_factors_with_rank_zero() {
        let a = DenseMatrix::zeros(3, 2);
        let f = svd(&a).unwrap();
        assert_eq!(f.sigma(), &[0.0, 0.0]);
        assert_eq!(f.rank(), 0);
        assert!(f.sigma_min_positive().is_none());
        check_factorization(&a, &f);
    }

    #[test]
    fn random_tall_wide_and_square_matrices_factor() {
        for (m, n, seed) in [(9, 5, 1u64), (5, 9, 2), (7, 7, 3), (12, 8, 4), (1, 4, 5), (6, 1, 6)] {
            let a = random_matrix(m, n, seed);
            let f = svd(&a).unwrap();
            assert_eq!(f.u().rows(), m);
            assert_eq!(f.u().cols(), m);
            assert_eq!(f.v().rows(), n);
            assert_eq!(f.v().cols(), n);
            assert_eq!(f.sigma().len(), m.min(n));
            check_factorization(&a, &f);
        }
    }

    #[test]
    fn rank_deficient_matrix_is_detected() {
        // Rank 2 by construction: third row is the sum of the first two.
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 2.0, 0.5, -1.0],
            vec![0.0, 1.0, 3.0, 2.0],
            vec![1.0, 3.0, 3.5, 1.0],
        ])
        .unwrap();
        let f = svd(&a).unwrap();
        assert_eq!(f.rank(), 2);
        check_factorization(&a, &f);
    }

    #[test]
    fn matrix_with_zero_columns_keeps_full_left_basis() {
        let mut a = DenseMatrix::zeros(5, 4);
        let src = random_matrix(5, 2, 9);
        for i in 0..5 {
            a.set(i, 0, src.get(i, 0));
            a.set(i, 2, src.get(i, 1));
        }
        let f = svd(&a).unwrap();
        assert_eq!(f.rank(), 2);
        assert_eq!(f.sigma()[2], 0.0);
        assert_eq!(f.sigma()[3], 0.0);
        check_factorization(&a, &f);
    }

    #[test]
    fn operator_norm_is_respected() {
        let a = random_matrix(8, 6, 11);
        let f = svd(&a).unwrap();
        let s1 = f.sigma()[0];
        let mut rng = RngStream::new(11, 1);
        for _ in 0..50 {
            let x = Vector::from_raw((0..6).map(|_| rng.next_gaussian()).collect());
            let ax = matvec(&a, &x).unwrap();
            assert!(ax.norm() <= s1 * x.norm() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn known_spectrum_is_recovered() {
        // Build A = U S V^T from seeded orthonormal factors and check the
        // computed singular values against the planted ones.
        let (a, spectrum) = crate::testgen::planted_spectrum_matrix(7, 5, 21);
        let f = svd(&a).unwrap();
        for (got, want) in f.sigma().iter().zip(&spectrum) {
            assert!(
                (got - want).abs() <= 1e-12 * spectrum[0],
                "sigma {got} vs planted {want}"
            );
        }
    }

    #[test]
    fn rank_tol_boundary_is_relative_to_sigma_max() {
        let a = DenseMatrix::from_rows(&[vec![1e4, 0.0], vec![0.0, 1e-8]]).unwrap();
        // 1e-8 / 1e4 = 1e-12 < default tol 1e-10, so the matrix counts as rank 1.
        let f = svd(&a).unwrap();
        assert_eq!(f.rank(), 1);
        // A tighter cutoff promotes it back to rank 2.
        let f2 = svd_with_tol(&a, 1e-14).unwrap();
        assert_eq!(f2.rank(), 2);
    }
}
