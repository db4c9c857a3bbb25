//! Robust statistical primitives: spatial (L1) median, MAD scale, Gaussian
//! kernel density machinery, Pearson residual ratios, the Hellinger residual
//! adjustment, weighted-likelihood observation weights, and trimmed means.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RfplsError};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Gaussian consistency factor for the median absolute deviation.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median of a slice; averages the two middle order statistics for even
/// lengths. Panics on empty input (callers validate).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Spatial median of the rows, minimizing the sum of Euclidean row distances,
/// via Weiszfeld iteration with the Vardi–Zhang handling of iterates that
/// land on a data row (gradient norm `<= 1e-9`, the data-point optimality
/// test, or 500 iterations). Returns the best iterate and whether a
/// convergence test fired.
pub fn l1_median(rows: ArrayView2<f64>) -> (Array1<f64>, bool) {
    let n = rows.nrows();
    if n == 1 {
        return (rows.row(0).to_owned(), true);
    }
    let scale = rows.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let dist_floor = 1e-12 * scale;
    let mut m = rows.mean_axis(Axis(0)).expect("nonempty sample");
    let objective = |c: &Array1<f64>| -> f64 {
        rows.rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .zip(c.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    };
    let mut best = m.clone();
    let mut best_obj = objective(&m);
    let mut converged = false;
    for _ in 0..500 {
        // Rows sitting exactly at the iterate ("anchors") make the objective
        // non-differentiable there; they are split off and handled with the
        // Vardi–Zhang optimality test and step.
        let mut anchors = 0usize;
        let mut weight_sum = 0.0;
        let mut weighted = Array1::<f64>::zeros(rows.ncols());
        let mut resultant = Array1::<f64>::zeros(rows.ncols());
        for r in rows.rows() {
            let d = r
                .iter()
                .zip(m.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d <= dist_floor {
                anchors += 1;
                continue;
            }
            weight_sum += 1.0 / d;
            for (j, v) in r.iter().enumerate() {
                weighted[j] += v / d;
                resultant[j] += (v - m[j]) / d;
            }
        }
        let r_norm = resultant.iter().map(|g| g * g).sum::<f64>().sqrt();
        if anchors > 0 {
            // A data point is the median exactly when the pull of the other
            // rows does not exceed its multiplicity.
            if r_norm <= anchors as f64 + 1e-9 {
                converged = true;
                break;
            }
            let target = weighted / weight_sum;
            let keep = anchors as f64 / r_norm;
            m = target * (1.0 - keep) + &m * keep;
        } else {
            if r_norm <= 1e-9 {
                converged = true;
                break;
            }
            m = weighted / weight_sum;
        }
        let obj = objective(&m);
        if obj < best_obj {
            best_obj = obj;
            best.assign(&m);
        }
    }
    if converged {
        let obj = objective(&m);
        if obj <= best_obj {
            best = m;
        }
    }
    (best, converged)
}

/// Consistency-scaled median absolute deviation:
/// `1.4826 * median(|x_i - median(x)|)`. Returns 0 when more than half the
/// values coincide; callers must treat 0 as a degenerate-scale flag.
pub fn mad_scale(xs: &[f64]) -> f64 {
    let center = median(xs);
    let deviations: Vec<f64> = xs.iter().map(|x| (x - center).abs()).collect();
    MAD_CONSISTENCY * median(&deviations)
}

fn kernel_unchecked(e: f64, u: f64, v: f64) -> f64 {
    let z = (e - u) / v;
    (-0.5 * z * z).exp() / (SQRT_2PI * v)
}

/// Gaussian kernel density `exp(-(e-u)^2 / (2 v^2)) / (sqrt(2 pi) v)`.
pub fn gaussian_kernel(e: f64, u: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(RfplsError::invalid("kernel bandwidth must be positive"));
    }
    Ok(kernel_unchecked(e, u, v))
}

/// Kernel density estimate of the residual distribution evaluated at every
/// residual: `g(e_i) = (1/n) sum_j kernel(e_i; e_j, v)`. The self term is
/// included.
pub fn kde_at_residuals(residuals: ArrayView1<f64>, v: f64) -> Result<Array1<f64>> {
    if residuals.is_empty() {
        return Err(RfplsError::invalid("kernel density needs at least one residual"));
    }
    if !(v > 0.0) {
        return Err(RfplsError::invalid("kernel bandwidth must be positive"));
    }
    let n = residuals.len();
    let inv_n = 1.0 / n as f64;
    let mut out = Array1::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += kernel_unchecked(residuals[i], residuals[j], v);
        }
        out[i] = acc * inv_n;
    }
    Ok(out)
}

/// The model density smoothed by the kernel: for a mean-zero Gaussian error
/// model with scale `sigma` and kernel bandwidth `v`, the convolution is
/// Gaussian with variance `sigma^2 + v^2`.
pub fn smoothed_model_density(e: f64, sigma: f64, v: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(v > 0.0) {
        return Err(RfplsError::invalid(
            "smoothed model density needs positive sigma and bandwidth",
        ));
    }
    let s = (sigma * sigma + v * v).sqrt();
    Ok(kernel_unchecked(e, 0.0, s))
}

/// Elementwise ratio of the residual density estimate to the smoothed model
/// density. Large values mark observations the error model cannot explain.
pub fn pearson_residuals(g_star: ArrayView1<f64>, f_star: ArrayView1<f64>) -> Result<Array1<f64>> {
    if g_star.len() != f_star.len() {
        return Err(RfplsError::dims(format!(
            "density vectors of lengths {} and {}",
            g_star.len(),
            f_star.len()
        )));
    }
    if let Some(v) = f_star.iter().find(|v| !(**v > 0.0)) {
        return Err(RfplsError::numerical(format!(
            "smoothed model density must be positive, found {v}"
        )));
    }
    Ok(&g_star / &f_star)
}

/// Which algebraic form of the Hellinger residual adjustment to use. The two
/// differ by a constant inside the cap region and agree at the extremes; both
/// are kept so the choice is auditable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RafForm {
    /// `A(d) = 2 (d+1)^{1/2} - 1`.
    #[default]
    Shifted,
    /// `A(d) = 2 [(d+1)^{1/2} - 1]` (Lindsay's standard form).
    Lindsay,
}

/// Downweighting function `min{1, [A(d) + 1]_+ / (d + 1)}` built from the
/// Hellinger residual adjustment. `d` is clamped below at `-1 + 1e-12`.
pub fn hellinger_weight_with(delta: f64, form: RafForm) -> f64 {
    if !delta.is_finite() {
        // An unbounded ratio marks an observation infinitely far from the
        // model: fully downweighted.
        return 0.0;
    }
    let dp1 = delta.max(-1.0 + 1e-12) + 1.0;
    let a = match form {
        RafForm::Shifted => 2.0 * dp1.sqrt() - 1.0,
        RafForm::Lindsay => 2.0 * (dp1.sqrt() - 1.0),
    };
    (((a + 1.0).max(0.0)) / dp1).min(1.0)
}

/// [`hellinger_weight_with`] using the shifted adjustment form.
pub fn hellinger_weight(delta: f64) -> f64 {
    hellinger_weight_with(delta, RafForm::Shifted)
}

/// Density pair underlying the weights for one residual column.
#[derive(Debug, Clone)]
pub struct ResidualDensityPair {
    pub g_star: Array1<f64>,
    pub f_star: Array1<f64>,
    pub sigma: f64,
    pub bandwidth: f64,
}

/// Computes the kernel density estimate and smoothed model density for one
/// residual column, with `sigma` from the MAD and bandwidth
/// `v = sqrt(gamma * sigma^2)`. Returns `None` when the column scale is
/// degenerate (MAD = 0).
pub fn residual_densities(
    residuals: ArrayView1<f64>,
    gamma: f64,
) -> Result<Option<ResidualDensityPair>> {
    if !(gamma > 0.0) {
        return Err(RfplsError::invalid("gamma must be positive"));
    }
    let col: Vec<f64> = residuals.iter().copied().collect();
    let sigma = mad_scale(&col);
    if sigma == 0.0 {
        return Ok(None);
    }
    let bandwidth = sigma * gamma.sqrt();
    let g_star = kde_at_residuals(residuals, bandwidth)?;
    let mut f_star = Array1::zeros(residuals.len());
    for (i, e) in residuals.iter().enumerate() {
        // The convolution is strictly positive; floor it where the exponent
        // underflows so extreme outliers yield huge ratios, not errors.
        f_star[i] = smoothed_model_density(*e, sigma, bandwidth)?.max(f64::MIN_POSITIVE);
    }
    Ok(Some(ResidualDensityPair {
        g_star,
        f_star,
        sigma,
        bandwidth,
    }))
}

/// Per-observation weights in `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Array1<f64>,
    /// Residual columns whose MAD was zero; their weights were pinned to 1.
    pub degenerate_columns: Vec<usize>,
}

/// Weighted-likelihood observation weights from a residual matrix: per
/// column, Pearson ratios of the residual KDE to the smoothed Gaussian model
/// density feed the Hellinger adjustment; the observation weight is the
/// median of its per-column weights.
pub fn observation_weights(residual_matrix: ArrayView2<f64>, gamma: f64) -> Result<WeightVector> {
    observation_weights_with(residual_matrix, gamma, RafForm::Shifted)
}

/// [`observation_weights`] with an explicit adjustment form.
pub fn observation_weights_with(
    residual_matrix: ArrayView2<f64>,
    gamma: f64,
    form: RafForm,
) -> Result<WeightVector> {
    let (n, k) = residual_matrix.dim();
    if n < 2 {
        return Err(RfplsError::invalid(
            "observation weights need at least two rows",
        ));
    }
    if k == 0 {
        return Err(RfplsError::invalid(
            "observation weights need at least one residual column",
        ));
    }
    let mut per_column = Array2::<f64>::ones((n, k));
    let mut degenerate_columns = Vec::new();
    for col_idx in 0..k {
        let col = residual_matrix.column(col_idx);
        match residual_densities(col, gamma)? {
            Some(pair) => {
                let delta = pearson_residuals(pair.g_star.view(), pair.f_star.view())?;
                for i in 0..n {
                    per_column[[i, col_idx]] = hellinger_weight_with(delta[i], form);
                }
            }
            None => degenerate_columns.push(col_idx),
        }
    }
    if degenerate_columns.len() == k {
        return Err(RfplsError::DegenerateScale);
    }
    let mut weights = Array1::zeros(n);
    let mut row_buf = vec![0.0; k];
    for i in 0..n {
        for (j, v) in row_buf.iter_mut().enumerate() {
            *v = per_column[[i, j]];
        }
        weights[i] = median(&row_buf);
    }
    Ok(WeightVector {
        weights,
        degenerate_columns,
    })
}

/// Mean of the smallest `floor(q * n)` values (the largest are trimmed away).
pub fn trimmed_mean(xs: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(RfplsError::invalid("trim proportion q must be in (0, 1]"));
    }
    if xs.is_empty() {
        return Err(RfplsError::invalid("trimmed mean of empty input"));
    }
    let keep = ((q * xs.len() as f64 + 1e-9).floor() as usize).min(xs.len());
    if keep == 0 {
        return Err(RfplsError::invalid(format!(
            "trim proportion {q} retains no values out of {}",
            xs.len()
        )));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(sorted[..keep].iter().sum::<f64>() / keep as f64)
}
