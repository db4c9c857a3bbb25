//! Least-squares projection of observed curves onto a B-spline basis, and
//! GCV-based selection of the number of basis functions.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::bspline::BsplineBasis;
use crate::error::{Result, RfplsError};
use crate::funcdata::{FunctionalSample, Grid};
use crate::linalg::{cholesky_solve, condition_estimate};

/// Basis expansion coefficients for a sample of curves; row `i` holds the
/// coefficients of curve `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisCoefficients {
    pub coefs: Array2<f64>,
    pub basis: BsplineBasis,
}

impl BasisCoefficients {
    pub fn n_curves(&self) -> usize {
        self.coefs.nrows()
    }

    /// Reconstructs the curves on an evaluation grid.
    pub fn curves_on_grid(&self, grid: &Grid) -> Result<Array2<f64>> {
        let eval = self.basis.evaluate_matrix(grid)?;
        Ok(self.coefs.dot(&eval.t()))
    }
}

/// Fits each curve in `sample` by unpenalized least squares on the evaluated
/// basis. Residuals are orthogonal to the basis column space.
pub fn smooth_curves(sample: &FunctionalSample, basis: &BsplineBasis) -> Result<BasisCoefficients> {
    let p = sample.n_points();
    let k = basis.num_basis();
    if p < k {
        return Err(RfplsError::invalid(format!(
            "smoothing needs at least as many grid points as basis functions; got {p} points for {k} functions"
        )));
    }
    let eval = basis.evaluate_matrix(&sample.grid)?;
    let cross = eval.t().dot(&eval);
    let rhs = eval.t().dot(&sample.values.t());
    let solved = cholesky_solve(&cross, &rhs).map_err(|_| {
        RfplsError::numerical(format!(
            "basis cross-product is singular (condition estimate {:.3e}); \
             reduce the number of basis functions or refine the grid",
            condition_estimate(&cross)
        ))
    })?;
    Ok(BasisCoefficients {
        coefs: solved.t().to_owned(),
        basis: basis.clone(),
    })
}

/// Generalized cross-validation score for smoothing `sample` with `num_basis`
/// functions: `(RSS / (n p)) / (1 - K/p)^2`.
pub fn gcv_score(sample: &FunctionalSample, num_basis: usize, order: usize) -> Result<f64> {
    let p = sample.n_points();
    if num_basis >= p {
        return Err(RfplsError::invalid(format!(
            "GCV needs fewer basis functions than grid points; got {num_basis} for {p} points"
        )));
    }
    let basis = BsplineBasis::new(
        num_basis,
        order,
        (sample.grid.min(), sample.grid.max()),
    )?;
    let coefs = smooth_curves(sample, &basis)?;
    let fitted = coefs.curves_on_grid(&sample.grid)?;
    let rss: f64 = (&sample.values - &fitted).iter().map(|r| r * r).sum();
    let n = sample.n_curves() as f64;
    let shrink = 1.0 - num_basis as f64 / p as f64;
    Ok(rss / (n * p as f64) / (shrink * shrink))
}

/// Picks the number of basis functions minimizing GCV over a candidate set.
/// Ties break toward the smaller candidate. Returns the winner and the
/// per-candidate scores.
pub fn select_num_basis_gcv(
    sample: &FunctionalSample,
    order: usize,
    candidates: &[usize],
) -> Result<(usize, Vec<(usize, f64)>)> {
    if candidates.is_empty() {
        return Err(RfplsError::invalid("GCV needs at least one candidate"));
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut scores = Vec::with_capacity(sorted.len());
    for &k in &sorted {
        scores.push((k, gcv_score(sample, k, order)?));
    }
    let mut best = scores[0];
    for &(k, s) in &scores[1..] {
        if s < best.1 {
            best = (k, s);
        }
    }
    Ok((best.0, scores))
}

/// Cross-sectional mean of coefficient rows.
pub fn coef_mean(coefs: &BasisCoefficients) -> Array1<f64> {
    coefs
        .coefs
        .mean_axis(ndarray::Axis(0))
        .expect("coefficient matrix has at least one row")
}
