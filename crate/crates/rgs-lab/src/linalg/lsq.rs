//! Minimum-norm least-squares solutions and the problem container shared by
//! the solvers, oracles and diagnostics.

use super::matrix::{matvec, DenseMatrix, LinalgError, Vector};
use super::svd::{svd, SvdFactorization};

/// Minimum-norm least-squares solution of `min ||A x - b||`, i.e. the
/// pseudoinverse applied to `b`, assembled from a fresh SVD.
pub fn min_norm_lsq(a: &DenseMatrix, b: &Vector) -> Result<Vector, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            context: "min_norm_lsq",
            expected: a.rows(),
            found: b.len(),
        });
    }
    let f = svd(a)?;
    Ok(min_norm_from_svd(&f, b))
}

/// Same solution built from an existing factorization:
/// `x = sum_{l <= r} (u_l . b / sigma_l) v_l`.
pub fn min_norm_from_svd(f: &SvdFactorization, b: &Vector) -> Vector {
    let n = f.v().rows();
    let mut x = Vector::zeros(n);
    for l in 0..f.rank() {
        let coef = f.u().col_dot(l, b) / f.sigma()[l];
        f.v().col_axpy(l, coef, &mut x);
    }
    x
}

/// A least-squares instance with everything the iterative solvers and their
/// exact-expectation oracles need: the data `(A, b)`, the full SVD, the
/// minimum-norm solution `x*`, its image `A x*`, and cached norm tables.
#[derive(Debug, Clone)]
pub struct LsqProblem {
    a: DenseMatrix,
    b: Vector,
    svd: SvdFactorization,
    x_star: Vector,
    ax_star: Vector,
    col_sq_norms: Vec<f64>,
    row_sq_norms: Vec<f64>,
    frob_sq: f64,
}

impl LsqProblem {
    pub fn new(a: DenseMatrix, b: Vector) -> Result<Self, LinalgError> {
        if b.len() != a.rows() {
            return Err(LinalgError::DimensionMismatch {
                context: "LsqProblem::new",
                expected: a.rows(),
                found: b.len(),
            });
        }
        let svd_f = svd(&a)?;
        let x_star = min_norm_from_svd(&svd_f, &b);
        let ax_star = matvec(&a, &x_star)?;
        let col_sq_norms = a.column_sq_norms();
        let row_sq_norms = a.row_sq_norms();
        let frob_sq = a.frob_sq();
        Ok(Self {
            a,
            b,
            svd: svd_f,
            x_star,
            ax_star,
            col_sq_norms,
            row_sq_norms,
            frob_sq,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn svd(&self) -> &SvdFactorization {
        &self.svd
    }

    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }

    pub fn ax_star(&self) -> &Vector {
        &self.ax_star
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    pub fn row_sq_norms(&self) -> &[f64] {
        &self.row_sq_norms
    }

    /// Squared Frobenius norm of `A`.
    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matvec_t;
    use crate::sampling::RngStream;
    use crate::testgen;

    fn random_vector(len: usize, seed: u64, stream: u64) -> Vector {
        let mut rng = RngStream::new(seed, stream);
        Vector::from_raw((0..len).map(|_| rng.next_gaussian()).collect())
    }

    #[test]
    fn solution_satisfies_normal_equations() {
        for seed in 0..10u64 {
            let (a, _) = testgen::planted_spectrum_matrix(8, 5, seed);
            let b = random_vector(8, seed, 77);
            let p = LsqProblem::new(a, b).unwrap();
            let residual = p.b().sub(&matvec(p.a(), p.x_star()).unwrap());
            let grad = matvec_t(p.a(), &residual).unwrap();
            let scale = p.frob_sq().sqrt() * p.b().norm();
            assert!(
                grad.norm() <= 1e-8 * scale.max(1.0),
                "normal-equations residual {} at seed {seed}",
                grad.norm()
            );
        }
    }

    #[test]
    fn rank_deficient_solution_matches_planted_factor_oracle() {
        // Oracle: assemble the pseudoinverse solution from the factors the
        // matrix was built from, independently of our SVD.
        let spectrum = vec![3.0, 1.5, 0.75];
        let (a, u, v) = testgen::explicit_spectrum_factors(8, 5, 123, &spectrum).unwrap();
        let b = random_vector(8, 123, 5);
        let x = min_norm_lsq(&a, &b).unwrap();
        let mut oracle = Vector::zeros(5);
        for (l, &s) in spectrum.iter().enumerate() {
            let coef = u.col_dot(l, &b) / s;
            v.col_axpy(l, coef, &mut oracle);
        }
        let dev = x.sub(&oracle).norm();
        assert!(dev <= 1e-8 * oracle.norm().max(1.0), "deviation {dev}");
    }

    #[test]
    fn solution_lies_in_the_row_space() {
        let spectrum = vec![2.0, 1.0, 0.5];
        let (a, _) = testgen::planted_spectrum_matrix_with(7, 6, 9, &spectrum);
        let b = random_vector(7, 9, 6);
        let p = LsqProblem::new(a, b).unwrap();
        // Remove the row-space component; nothing should remain.
        let mut x = p.x_star().clone();
        for l in 0..p.rank() {
            let coef = p.svd().v().col_dot(l, p.x_star());
            p.svd().v().col_axpy(l, -coef, &mut x);
        }
        assert!(x.norm() <= 1e-10 * p.x_star().norm().max(1.0));
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let (a, _) = testgen::planted_spectrum_matrix(6, 4, 3);
        let x = min_norm_lsq(&a, &Vector::zeros(6)).unwrap();
        assert_eq!(x.as_slice(), &[0.0; 4]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (a, _) = testgen::planted_spectrum_matrix(6, 4, 3);
        assert!(matches!(
            min_norm_lsq(&a, &Vector::zeros(5)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LsqProblem::new(a, Vector::zeros(7)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }
}
