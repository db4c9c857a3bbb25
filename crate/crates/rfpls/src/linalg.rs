//! Small dense linear-algebra helpers shared across the crate.
//!
//! Matrices live in `ndarray` types everywhere else; this module converts to
//! `nalgebra` for factorizations (symmetric eigendecomposition, Cholesky) and
//! converts back.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Result, RfplsError};

pub fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub fn to_array2(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted ascending.
///
/// The input is symmetrized as `(A + Aᵀ)/2` first so that accumulated
/// round-off in a nominally symmetric product cannot leak in.
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(RfplsError::dims(format!(
            "symmetric eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("eigenvalues of a finite symmetric matrix are finite")
    });
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors =
        Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Symmetric square root and inverse square root of a positive semidefinite
/// matrix, with eigenvalues floored at `1e-12 * lambda_max` so that a nearly
/// singular input still yields a usable inverse.
pub fn sym_sqrt_pair(a: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (values, vectors) = sym_eigen(a)?;
    let n = values.len();
    let lambda_max = values[n - 1];
    if !(lambda_max > 0.0) {
        return Err(RfplsError::numerical(
            "matrix square root requires at least one positive eigenvalue",
        ));
    }
    let floor = 1e-12 * lambda_max;
    let mut sqrt = Array2::zeros((n, n));
    let mut inv_sqrt = Array2::zeros((n, n));
    for k in 0..n {
        let lam = values[k].max(floor);
        let s = lam.sqrt();
        for i in 0..n {
            for j in 0..n {
                let outer = vectors[[i, k]] * vectors[[j, k]];
                sqrt[[i, j]] += s * outer;
                inv_sqrt[[i, j]] += outer / s;
            }
        }
    }
    Ok((sqrt, inv_sqrt))
}

/// Ratio of the largest to the smallest eigenvalue magnitude, as a cheap
/// conditioning diagnostic for error messages.
pub fn condition_estimate(a: &Array2<f64>) -> f64 {
    match sym_eigen(a) {
        Ok((values, _)) => {
            let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let min = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if min > 0.0 {
                max / min
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::NAN,
    }
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.nrows() != b.nrows() {
        return Err(RfplsError::dims(format!(
            "cholesky solve: lhs has {} rows, rhs has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let chol = nalgebra::Cholesky::new(to_dmatrix(a)).ok_or_else(|| {
        RfplsError::numerical(format!(
            "matrix is not positive definite (condition estimate {:.3e})",
            condition_estimate(a)
        ))
    })?;
    Ok(to_array2(&chol.solve(&to_dmatrix(b))))
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when the factorization fails.
pub fn cholesky_lower(a: &Array2<f64>) -> Option<Array2<f64>> {
    nalgebra::Cholesky::new(to_dmatrix(a)).map(|c| to_array2(&c.l()))
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean norm of a vector.
pub fn vec_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(dead_code)]
pub fn to_dvector(v: &Array1<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}
