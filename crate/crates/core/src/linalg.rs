//! Dense linear-algebra kernels: SVD pseudoinverse, row-space projections,
//! regularized-inverse traces and Hadamard products.
//!
//! Everything here is a pure function of its inputs. Reductions go through
//! [`compensated_sum`] so that Monte Carlo aggregates do not depend on the
//! order in which replicates finish.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values at or below `DEFAULT_RANK_TOL * sigma_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Relative entrywise asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub fn norm2(v: &Vector) -> f64 {
    compensated_sum(v.iter().map(|x| x * x))
}

pub fn frobenius_norm2(m: &Matrix) -> f64 {
    compensated_sum(m.iter().map(|x| x * x))
}

pub fn trace(m: &Matrix) -> f64 {
    compensated_sum(m.diagonal().iter().copied())
}

/// `u^T M u`.
pub fn quadratic_form(m: &Matrix, u: &Vector) -> f64 {
    let mu = m * u;
    dot(u.as_slice(), mu.as_slice())
}

pub(crate) fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

fn ensure_nonempty(m: &Matrix, op: &'static str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::shape(op, "non-empty matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Thin SVD truncated to the numerical rank.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// Nonincreasing, strictly positive.
    pub singular_values: Vector,
    /// `rows x rank`, orthonormal columns.
    pub left_vectors: Matrix,
    /// `cols x rank`, orthonormal columns.
    pub right_vectors: Matrix,
}

impl SvdFactors {
    pub fn compute(a: &Matrix, rank_tol: f64) -> Result<Self> {
        ensure_nonempty(a, "svd")?;
        ensure_finite(a, "svd input")?;
        if !(rank_tol > 0.0) {
            return Err(Error::invalid("rank_tol", "must be positive"));
        }
        let svd = SVD::new(a.clone(), true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let sv = svd.singular_values;

        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
        let sigma_max = order.first().map(|&i| sv[i]).unwrap_or(0.0);
        let cutoff = rank_tol * sigma_max;
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| sv[i] > cutoff && sv[i] > 0.0)
            .collect();

        let rank = kept.len();
        let mut singular_values = Vector::zeros(rank);
        let mut left_vectors = Matrix::zeros(a.nrows(), rank);
        let mut right_vectors = Matrix::zeros(a.ncols(), rank);
        for (slot, &i) in kept.iter().enumerate() {
            singular_values[slot] = sv[i];
            left_vectors.set_column(slot, &u.column(i));
            right_vectors.set_column(slot, &v_t.row(i).transpose());
        }
        Ok(Self {
            singular_values,
            left_vectors,
            right_vectors,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `sum_j sigma_j u_j v_j^T`
    pub fn reconstruct(&self) -> Matrix {
        let scaled = &self.left_vectors * Matrix::from_diagonal(&self.singular_values);
        scaled * self.right_vectors.transpose()
    }

    /// `sum_j sigma_j^{-1} v_j u_j^T`
    pub fn pseudo_inverse(&self) -> Matrix {
        let inv = self.singular_values.map(|s| 1.0 / s);
        let scaled = &self.right_vectors * Matrix::from_diagonal(&inv);
        scaled * self.left_vectors.transpose()
    }
}

/// Moore-Penrose pseudoinverse through a truncated SVD.
pub fn svd_pseudo_inverse(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let factors = SvdFactors::compute(a, rank_tol)?;
    Ok(factors.pseudo_inverse())
}

pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    svd_pseudo_inverse(a, DEFAULT_RANK_TOL)
}

/// Orthogonal projector onto the span of the rows of `w` (`W^+ W`), `p x p`.
pub fn row_space_projection(w: &Matrix) -> Result<Matrix> {
    let factors = SvdFactors::compute(w, DEFAULT_RANK_TOL)?;
    let v = &factors.right_vectors;
    Ok(v * v.transpose())
}

/// `|(I - P) beta|^2` where `P` projects onto the row space of `w`.
///
/// Uses a Cholesky solve on the smaller Gram matrix; a rank-deficient Gram
/// falls back to the SVD projector.
pub fn row_space_residual(w: &Matrix, beta: &Vector) -> Result<f64> {
    if w.ncols() != beta.len() {
        return Err(Error::shape("row_space_residual", w.ncols(), beta.len()));
    }
    let total = norm2(beta);
    if w.nrows() == 0 {
        return Ok(total);
    }
    if w.nrows() <= w.ncols() {
        let gram = w * w.transpose();
        let rhs = w * beta;
        if let Some(chol) = Cholesky::new(gram) {
            let coef = chol.solve(&rhs);
            let explained = dot(rhs.as_slice(), coef.as_slice());
            return Ok((total - explained).max(0.0));
        }
    } else if Cholesky::new(w.transpose() * w).is_some() {
        // Full column rank: the rows span the whole latent space.
        return Ok(0.0);
    }
    let proj = row_space_projection(w)?;
    let resid = beta - proj * beta;
    Ok(norm2(&resid))
}

/// Checks symmetry up to `SYMMETRY_TOL * max|a|` and returns `(A + A^T) / 2`.
pub fn symmetrize_checked(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::shape("symmetrize", "square matrix", format!("{}x{}", a.nrows(), a.ncols())));
    }
    ensure_finite(a, "symmetric input")?;
    let scale = a.amax();
    let asym = (a - a.transpose()).amax();
    let tolerance = SYMMETRY_TOL * scale;
    if asym > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance,
        });
    }
    Ok((a + a.transpose()) * 0.5)
}

/// `Tr((A + lambda I)^{-1})` for symmetric PSD `A`.
pub fn trace_reg_inverse(a: &Matrix, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    let sym = symmetrize_checked(a)?;
    let n = sym.nrows();
    let shifted = sym + Matrix::identity(n, n) * lambda;
    let chol = Cholesky::new(shifted).ok_or(Error::Singular("A + lambda I is not positive definite"))?;
    // Tr(M^{-1}) = |L^{-1}|_F^2 for M = L L^T.
    let l_inv = chol
        .l()
        .solve_lower_triangular(&Matrix::identity(n, n))
        .ok_or(Error::Singular("triangular factor"))?;
    Ok(frobenius_norm2(&l_inv))
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "hadamard",
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(a.component_mul(b))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let sym = symmetrize_checked(a)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(a)?[0])
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::shape("solve_spd", a.nrows(), b.len()));
    }
    let chol = Cholesky::new(a.clone()).ok_or(Error::Singular("matrix is not positive definite"))?;
    Ok(chol.solve(b))
}
