//! Partial least squares by cross-covariance deflation, and its iteratively
//! reweighted robust variant with random subsample starts.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RfplsError};
use crate::linalg::{frobenius, vec_norm};
use crate::robust::{
    l1_median, mad_scale, observation_weights_with, RafForm, WeightVector,
};
use crate::rng::stream_rng;

/// Relative Frobenius threshold below which the deflated cross-covariance is
/// considered exhausted (no further components exist).
const EXHAUSTION_TOL: f64 = 1e-12;

/// A fitted PLS regression of a response block on a predictor block.
///
/// `coefficients` maps a centered (and scaled, if applicable) predictor row
/// to a centered response row. `x_center`, `x_scale`, and `y_center` record
/// the transformation, so [`pls_predict`] can be applied to raw rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlsFit {
    pub coefficients: Array2<f64>,
    pub n_components: usize,
    pub x_weights: Array2<f64>,
    pub x_scores: Array2<f64>,
    pub x_loadings: Array2<f64>,
    pub y_loadings: Array2<f64>,
    pub obs_weights: WeightVector,
    pub converged: bool,
    pub n_reweight_iters: usize,
    pub objective: f64,
    pub x_center: Array1<f64>,
    pub x_scale: Array1<f64>,
    pub y_center: Array1<f64>,
}

/// How rows are centered before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CenterMethod {
    /// Spatial (L1) median of the rows: the robust default.
    #[default]
    L1Median,
    /// Ordinary column means; used to compare against the unweighted fit.
    ColumnMean,
}

/// Configuration of the iteratively reweighted fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrsimplsConfig {
    pub n_components: usize,
    pub gamma: f64,
    /// Rows per random start; `None` selects
    /// `max(4 (h + 1), ceil(n / 4))` capped at `n`.
    pub subsample_size: Option<usize>,
    pub n_starts: usize,
    pub convergence_tol: f64,
    pub max_reweight_iters: usize,
    pub rng_seed: u64,
    pub center: CenterMethod,
    pub scale_x: bool,
    /// Pins every observation weight to 1, reducing the algorithm to the
    /// unweighted fit on the chosen centering. A test seam, not for analysis.
    pub force_unit_weights: bool,
    pub raf_form: RafForm,
}

impl Default for IrsimplsConfig {
    fn default() -> Self {
        IrsimplsConfig {
            n_components: 1,
            // Kernel bandwidth factor: 0.2 keeps the smoothed model density
            // tight enough that rows sitting several scale units out still
            // receive small weights at moderate sample sizes; 1.0 smooths
            // the reference density so much that even gross outliers look
            // ordinary to it.
            gamma: 0.2,
            subsample_size: None,
            // Enough random starts that at least one subsample is free of
            // contamination with high probability at realistic outlier
            // rates (at 20% contamination and the default subsample size,
            // one start is clean with probability about 1/6).
            n_starts: 25,
            convergence_tol: 1e-4,
            max_reweight_iters: 50,
            rng_seed: 0,
            center: CenterMethod::L1Median,
            scale_x: true,
            force_unit_weights: false,
            raf_form: RafForm::Shifted,
        }
    }
}

impl IrsimplsConfig {
    pub fn new(n_components: usize, rng_seed: u64) -> Self {
        IrsimplsConfig {
            n_components,
            rng_seed,
            ..Default::default()
        }
    }

    fn validate(&self, n: usize, p: usize) -> Result<usize> {
        if self.n_components < 1 || self.n_components > p {
            return Err(RfplsError::invalid(format!(
                "n_components must be in 1..={p}, got {}",
                self.n_components
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(RfplsError::invalid("gamma must be positive"));
        }
        if self.n_starts < 1 {
            return Err(RfplsError::invalid("n_starts must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(RfplsError::invalid("convergence_tol must be positive"));
        }
        // Small subsamples keep the odds high that some start contains no
        // outliers; the floor of 8 (raised for component counts the rank
        // could not support) is enough rows for a usable starting fit, and
        // the reweighting iterations polish whatever noise the small start
        // leaves behind.
        let default_size = (self.n_components + 3).max(8).min(n);
        let n_r = self.subsample_size.unwrap_or(default_size);
        if n_r < 2 || n_r > n {
            return Err(RfplsError::invalid(format!(
                "subsample size must be in 2..={n}, got {n_r}"
            )));
        }
        Ok(n_r)
    }
}

/// Dominant eigenvector of a symmetric positive semidefinite matrix by power
/// iteration (tolerance 1e-12), with the sign fixed so the largest-magnitude
/// entry is positive.
fn dominant_eigenvector(m: &Array2<f64>) -> Array1<f64> {
    let q = m.nrows();
    if q == 1 {
        return Array1::ones(1);
    }
    // Start from the largest column: never orthogonal to the dominant
    // eigenspace of a PSD matrix.
    let mut best_col = 0;
    let mut best_norm = -1.0;
    for j in 0..q {
        let norm = vec_norm(&m.column(j).to_owned());
        if norm > best_norm {
            best_norm = norm;
            best_col = j;
        }
    }
    let mut u = m.column(best_col).to_owned();
    let norm = vec_norm(&u);
    if norm == 0.0 {
        // Zero matrix: any unit vector is an eigenvector.
        u = Array1::zeros(q);
        u[0] = 1.0;
        return u;
    }
    u /= norm;
    for _ in 0..10_000 {
        let mut next = m.dot(&u);
        let next_norm = vec_norm(&next);
        if next_norm == 0.0 {
            break;
        }
        next /= next_norm;
        // Align signs before measuring the change.
        if next.dot(&u) < 0.0 {
            next.mapv_inplace(|v| -v);
        }
        let diff = (&next - &u).iter().map(|v| v * v).sum::<f64>().sqrt();
        u = next;
        if diff <= 1e-12 {
            break;
        }
    }
    // Deterministic sign: largest-magnitude entry positive.
    let mut idx = 0;
    let mut max_abs = -1.0;
    for (j, v) in u.iter().enumerate() {
        if v.abs() > max_abs {
            max_abs = v.abs();
            idx = j;
        }
    }
    if u[idx] < 0.0 {
        u.mapv_inplace(|v| -v);
    }
    u
}

/// Ordinary PLS fit of centered `y` on centered `x` with `h` components,
/// extracting each component from the deflated cross-covariance matrix
/// `S = Xᵀ Y`.
///
/// Per component: the dominant right singular direction of the deflated `S`
/// gives the response weight, `r = S q` the predictor weight; scores are
/// `t = X r`, normalized; loadings `Xᵀ t` and `Yᵀ t`; `S` is then deflated
/// against the orthonormalized loading history. The coefficient matrix is
/// `R Q_loadᵀ`, and fitted values are `X · coefficients`.
pub fn simpls_fit(x: ArrayView2<f64>, y: ArrayView2<f64>, h: usize) -> Result<PlsFit> {
    let (n, p) = x.dim();
    let q = y.ncols();
    if y.nrows() != n {
        return Err(RfplsError::dims(format!(
            "predictor block has {n} rows, response block has {}",
            y.nrows()
        )));
    }
    if n < 2 {
        return Err(RfplsError::invalid("PLS needs at least two rows"));
    }
    if h < 1 || h > p {
        return Err(RfplsError::invalid(format!(
            "component count must be in 1..={p}, got {h}"
        )));
    }

    let mut s = x.t().dot(&y);
    let s0_norm = frobenius(&s);
    if s0_norm == 0.0 {
        return Err(RfplsError::numerical(
            "cross-covariance between predictors and response is zero",
        ));
    }
    let x_fro = frobenius(&x.to_owned());

    let mut x_weights = Array2::zeros((p, h));
    let mut x_scores = Array2::zeros((n, h));
    let mut x_loadings = Array2::zeros((p, h));
    let mut y_loadings = Array2::zeros((q, h));
    // Orthonormalized loading directions used for deflation.
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(h);

    for a in 0..h {
        if frobenius(&s) <= EXHAUSTION_TOL * s0_norm {
            return Err(RfplsError::RankExceeded {
                requested: h,
                achievable: a,
            });
        }
        let m = s.t().dot(&s);
        let q_dir = dominant_eigenvector(&m);
        let mut r = s.dot(&q_dir);
        let mut t = x.dot(&r);
        let normt = vec_norm(&t);
        if normt <= 1e-12 * x_fro * vec_norm(&r) {
            return Err(RfplsError::RankExceeded {
                requested: h,
                achievable: a,
            });
        }
        t /= normt;
        r /= normt;
        let p_load = x.t().dot(&t);
        let q_load = y.t().dot(&t);

        let mut v = p_load.clone();
        for b in &basis {
            let proj = b.dot(&v);
            v.scaled_add(-proj, b);
        }
        let v_norm = vec_norm(&v);
        if v_norm <= 1e-12 * vec_norm(&p_load).max(1.0) {
            // The new loading adds nothing to deflate against; the predictor
            // space relevant to the response is exhausted.
            return Err(RfplsError::RankExceeded {
                requested: h,
                achievable: a,
            });
        }
        v /= v_norm;
        // Deflate: remove the loading direction from the cross-covariance.
        let vts = v.dot(&s);
        for i in 0..p {
            for j in 0..q {
                s[[i, j]] -= v[i] * vts[j];
            }
        }

        x_weights.column_mut(a).assign(&r);
        x_scores.column_mut(a).assign(&t);
        x_loadings.column_mut(a).assign(&p_load);
        y_loadings.column_mut(a).assign(&q_load);
        basis.push(v);
    }

    let coefficients = x_weights.dot(&y_loadings.t());
    let resid = &y.to_owned() - &x.dot(&coefficients);
    let objective = resid.iter().map(|v| v.abs()).sum();
    Ok(PlsFit {
        coefficients,
        n_components: h,
        x_weights,
        x_scores,
        x_loadings,
        y_loadings,
        obs_weights: WeightVector {
            weights: Array1::ones(n),
            degenerate_columns: Vec::new(),
        },
        converged: true,
        n_reweight_iters: 0,
        objective,
        x_center: Array1::zeros(p),
        x_scale: Array1::ones(p),
        y_center: Array1::zeros(q),
    })
}

/// Applies a fit to new raw predictor rows: rows are centered and scaled with
/// the fit's stored transformation, multiplied by the coefficients, and the
/// response center is added back.
pub fn pls_predict(fit: &PlsFit, x_new: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = fit.coefficients.nrows();
    if x_new.ncols() != p {
        return Err(RfplsError::dims(format!(
            "fit expects {p} predictor columns, got {}",
            x_new.ncols()
        )));
    }
    let mut xs = x_new.to_owned();
    for mut row in xs.rows_mut() {
        row -= &fit.x_center;
        row /= &fit.x_scale;
    }
    let mut yhat = xs.dot(&fit.coefficients);
    for mut row in yhat.rows_mut() {
        row += &fit.y_center;
    }
    Ok(yhat)
}

struct StartResult {
    coefficients: Array2<f64>,
    components: Option<PlsFit>,
    weights: WeightVector,
    converged: bool,
    n_iters: usize,
    objective: f64,
}

/// Iteratively reweighted PLS fit:
///
/// 1. center `x` and `y` rows (L1 median by default) and scale the centered
///    predictor columns by their MAD;
/// 2. compute initial weights from the rows of the centered and scaled
///    predictor matrix, flagging rows that sit far from the bulk in
///    predictor space before any model exists;
/// 3. per random start, fit ordinary PLS on a subsample of the
///    initially-weighted rows for starting coefficients, so high-leverage
///    rows that land in the subsample cannot dominate the start;
/// 4.-7. iterate: full-sample residuals, recentered and rescaled, yield new
///    weights that multiply into each row's running weight; rows scaled by
///    the square root of the running weights are refit. Compounding the
///    weights lets persistent moderate downweighting accumulate into
///    effective exclusion: a row flagged at, say, 0.5 on every round is
///    gone within a few iterations, while rows the weight function keeps
///    at 1 are never touched. Without compounding, moderate outliers
///    settle into a partial-accommodation fixed point: the refit halves
///    their residuals, the weights release, and the fit absorbs them;
/// 8. stop when the largest coefficient change drops below the tolerance or
///    the iteration budget runs out;
/// 9. across starts, keep the fit whose weighted sum of absolute residuals
///    (each row's contribution multiplied by its final weight) is smallest
///    (ties to the lowest start). Weighting the criterion keeps a start that
///    downweights genuine outliers from being penalized for their large
///    residuals, which would otherwise steer selection toward fits that
///    accommodate the contamination.
pub fn irsimpls_fit(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    config: &IrsimplsConfig,
) -> Result<PlsFit> {
    let (n, p) = x.dim();
    let q = y.ncols();
    if y.nrows() != n {
        return Err(RfplsError::dims(format!(
            "predictor block has {n} rows, response block has {}",
            y.nrows()
        )));
    }
    if n < 2 {
        return Err(RfplsError::invalid("reweighted PLS needs at least two rows"));
    }
    let n_r = config.validate(n, p)?;
    let h = config.n_components;

    // Step 1: center rows, then scale predictor columns robustly.
    let x_center = match config.center {
        CenterMethod::L1Median => l1_median(x).0,
        CenterMethod::ColumnMean => x.mean_axis(Axis(0)).expect("n >= 2"),
    };
    let y_center = match config.center {
        CenterMethod::L1Median => l1_median(y).0,
        CenterMethod::ColumnMean => y.mean_axis(Axis(0)).expect("n >= 2"),
    };
    let mut xs = x.to_owned();
    for mut row in xs.rows_mut() {
        row -= &x_center;
    }
    let mut yc = y.to_owned();
    for mut row in yc.rows_mut() {
        row -= &y_center;
    }
    let mut x_scale = Array1::ones(p);
    if config.scale_x {
        for j in 0..p {
            let col: Vec<f64> = xs.column(j).iter().copied().collect();
            let s = mad_scale(&col);
            // A degenerate column stays unscaled rather than exploding.
            if s > 0.0 {
                x_scale[j] = s;
            }
        }
        for mut row in xs.rows_mut() {
            row /= &x_scale;
        }
    }

    // Step 2: initial weights from the rows of the centered, scaled
    // predictor matrix, so rows far from the predictor bulk start
    // downweighted before any model exists.
    let unit_weights = || WeightVector {
        weights: Array1::ones(n),
        degenerate_columns: Vec::new(),
    };
    let init_weights = if config.force_unit_weights {
        unit_weights()
    } else {
        match observation_weights_with(xs.view(), config.gamma, config.raf_form) {
            Ok(w) => w,
            // Predictors with no spread in any column carry no leverage
            // signal; start from neutral weights.
            Err(RfplsError::DegenerateScale) => unit_weights(),
            Err(e) => return Err(e),
        }
    };

    let weight_rows = |mat: &Array2<f64>, w: &Array1<f64>| -> Array2<f64> {
        let mut out = mat.clone();
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let sw = w[i].max(0.0).sqrt();
            row.mapv_inplace(|v| v * sw);
        }
        out
    };

    // Rows pre-scaled by the initial weights; subsample starts fit on these
    // so the starting coefficients already discount high-leverage rows.
    let x_init = weight_rows(&xs, &init_weights.weights);
    let y_init = weight_rows(&yc, &init_weights.weights);

    let mut best: Option<(usize, StartResult)> = None;
    let mut first_error: Option<RfplsError> = None;

    for start in 0..config.n_starts {
        let mut rng = stream_rng(config.rng_seed, start as u64);
        let mut indices: Vec<usize> =
            rand::seq::index::sample(&mut rng, n, n_r).into_iter().collect();
        indices.sort_unstable();
        let x_sub = x_init.select(Axis(0), &indices);
        let y_sub = y_init.select(Axis(0), &indices);

        // Step 3: ordinary fit on the subsample as the starting value.
        let start_fit = match simpls_fit(x_sub.view(), y_sub.view(), h) {
            Ok(f) => f,
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
                continue;
            }
        };
        let mut omega = start_fit.coefficients.clone();
        let mut components = None;
        let mut weights = init_weights.clone();
        let mut converged = false;
        let mut n_iters = 0;

        for _ in 0..config.max_reweight_iters {
            // Step 4: residuals on the full transformed sample.
            let mut resid = &yc - &xs.dot(&omega);
            // Step 5: recenter by the spatial median and rescale columns.
            let (resid_center, _) = l1_median(resid.view());
            for mut row in resid.rows_mut() {
                row -= &resid_center;
            }
            for j in 0..q {
                let col: Vec<f64> = resid.column(j).iter().copied().collect();
                let s = mad_scale(&col);
                if s > 0.0 {
                    resid.column_mut(j).mapv_inplace(|v| v / s);
                }
            }
            // Step 6: weights from the standardized residuals, compounded
            // into the running row weights.
            if !config.force_unit_weights {
                let fresh = match observation_weights_with(
                    resid.view(),
                    config.gamma,
                    config.raf_form,
                ) {
                    Ok(w) => w,
                    // All residual columns degenerate means the fit is
                    // already tight; nothing left to downweight.
                    Err(RfplsError::DegenerateScale) => unit_weights(),
                    Err(e) => return Err(e),
                };
                for (acc, w) in weights.weights.iter_mut().zip(fresh.weights.iter()) {
                    *acc *= w;
                }
                weights.degenerate_columns = fresh.degenerate_columns;
            }
            // Step 7: refit on rows scaled by sqrt-weights.
            let xw = weight_rows(&xs, &weights.weights);
            let yw = weight_rows(&yc, &weights.weights);
            let refit = match simpls_fit(xw.view(), yw.view(), h) {
                Ok(f) => f,
                // Downweighting can starve the subproblem of rank; keep the
                // previous coefficients rather than aborting the start.
                Err(_) => break,
            };
            let delta = refit
                .coefficients
                .iter()
                .zip(omega.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            omega = refit.coefficients.clone();
            components = Some(refit);
            n_iters += 1;
            // Step 8: convergence on the largest coefficient change.
            if delta < config.convergence_tol {
                converged = true;
                break;
            }
        }

        // Step 9 objective: weighted absolute deviations on the full sample,
        // each row's residual magnitudes multiplied by that row's final
        // weight. Rows the fit identified as outliers therefore cannot veto
        // the start that excluded them.
        let resid = &yc - &xs.dot(&omega);
        let objective = resid
            .rows()
            .into_iter()
            .zip(weights.weights.iter())
            .map(|(row, &w)| w * row.iter().map(|v| v.abs()).sum::<f64>())
            .sum::<f64>();
        let candidate = StartResult {
            coefficients: omega,
            components: components.or(Some(start_fit)),
            weights,
            converged,
            n_iters,
            objective,
        };
        let replace = match &best {
            None => true,
            Some((_, b)) => candidate.objective < b.objective,
        };
        if replace {
            best = Some((start, candidate));
        }
    }

    let (_, winner) = best.ok_or_else(|| {
        first_error.unwrap_or_else(|| RfplsError::numerical("every start failed to fit"))
    })?;
    let comp = winner.components.expect("winning start holds a fit");
    Ok(PlsFit {
        coefficients: winner.coefficients,
        n_components: h,
        x_weights: comp.x_weights,
        x_scores: comp.x_scores,
        x_loadings: comp.x_loadings,
        y_loadings: comp.y_loadings,
        obs_weights: winner.weights,
        converged: winner.converged,
        n_reweight_iters: winner.n_iters,
        objective: winner.objective,
        x_center,
        x_scale,
        y_center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky_solve;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        })
    }

    fn center_cols(mut m: Array2<f64>) -> Array2<f64> {
        let mean = m.mean_axis(Axis(0)).unwrap();
        for mut row in m.rows_mut() {
            row -= &mean;
        }
        m
    }

    fn ls_fitted(x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
        let xtx = x.t().dot(x);
        let xty = x.t().dot(y);
        let beta = cholesky_solve(&xtx, &xty).unwrap();
        x.dot(&beta)
    }

    #[test]
    fn single_component_weight_follows_cross_covariance() {
        // Orthonormal predictor columns, univariate response: the first
        // weight vector must be proportional to X'y.
        let x = array![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0]
        ];
        let y = array![[2.0], [-1.0], [0.5], [0.0]];
        let fit = simpls_fit(x.view(), y.view(), 1).unwrap();
        let s = x.t().dot(&y);
        let s_norm = vec_norm(&s.column(0).to_owned());
        let r = fit.x_weights.column(0).to_owned();
        let r_norm = vec_norm(&r);
        let cosine = r.dot(&s.column(0)) / (r_norm * s_norm);
        assert_abs_diff_eq!(cosine.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_component_fit_equals_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = center_cols(randn(&mut rng, 30, 6));
        let y = center_cols(randn(&mut rng, 30, 3));
        let fit = simpls_fit(x.view(), y.view(), 6).unwrap();
        let pls_fitted = x.dot(&fit.coefficients);
        let ls = ls_fitted(&x, &y);
        let num = (&pls_fitted - &ls).iter().map(|v| v * v).sum::<f64>().sqrt();
        let den = ls.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "relative gap {}", num / den);
    }

    #[test]
    fn scores_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = center_cols(randn(&mut rng, 30, 6));
        let y = center_cols(randn(&mut rng, 30, 3));
        let fit = simpls_fit(x.view(), y.view(), 4).unwrap();
        let gram = fit.x_scores.t().dot(&fit.x_scores);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[[i, j]], expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn coefficients_rebuild_from_weights_and_loadings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = center_cols(randn(&mut rng, 25, 5));
        let y = center_cols(randn(&mut rng, 25, 2));
        let fit = simpls_fit(x.view(), y.view(), 3).unwrap();
        let rebuilt = fit.x_weights.dot(&fit.y_loadings.t());
        for (a, b) in rebuilt.iter().zip(fit.coefficients.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rss_is_monotone_in_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = center_cols(randn(&mut rng, 40, 8));
        let b = randn(&mut rng, 8, 3);
        let y = center_cols(x.dot(&b) + 0.5 * randn(&mut rng, 40, 3));
        let mut prev = f64::INFINITY;
        for h in 1..=8 {
            let fit = simpls_fit(x.view(), y.view(), h).unwrap();
            let rss: f64 = (&y - &x.dot(&fit.coefficients)).iter().map(|v| v * v).sum();
            assert!(rss <= prev + 1e-9, "RSS rose at h={h}: {rss} > {prev}");
            prev = rss;
        }
    }

    #[test]
    fn rank_deficient_predictors_name_achievable_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = center_cols(randn(&mut rng, 30, 3));
        let mut x = Array2::zeros((30, 6));
        for i in 0..30 {
            for j in 0..3 {
                x[[i, j]] = a[[i, j]];
                x[[i, j + 3]] = a[[i, j]];
            }
        }
        let y = center_cols(randn(&mut rng, 30, 2));
        let err = simpls_fit(x.view(), y.view(), 5).unwrap_err();
        match err {
            RfplsError::RankExceeded {
                requested,
                achievable,
            } => {
                assert_eq!(requested, 5);
                assert_eq!(achievable, 3);
            }
            other => panic!("expected RankExceeded, got {other}"),
        }
    }

    #[test]
    fn zero_covariance_is_rejected() {
        let x = array![[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]];
        let y = array![[0.0], [0.0], [0.0], [0.0]];
        assert!(simpls_fit(x.view(), y.view(), 1).is_err());
    }

    #[test]
    fn predict_on_training_rows_matches_fitted_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = center_cols(randn(&mut rng, 20, 4));
        let y = center_cols(randn(&mut rng, 20, 2));
        let fit = simpls_fit(x.view(), y.view(), 2).unwrap();
        let pred = pls_predict(&fit, x.view()).unwrap();
        let fitted = x.dot(&fit.coefficients);
        for (a, b) in pred.iter().zip(fitted.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn predict_at_the_center_returns_the_response_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = randn(&mut rng, 30, 4) + 5.0;
        let y = randn(&mut rng, 30, 2) - 2.0;
        let config = IrsimplsConfig {
            n_components: 2,
            ..IrsimplsConfig::new(2, 42)
        };
        let fit = irsimpls_fit(x.view(), y.view(), &config).unwrap();
        let center_row =
            Array2::from_shape_fn((1, 4), |(_, j)| fit.x_center[j]);
        let pred = pls_predict(&fit, center_row.view()).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(pred[[0, j]], fit.y_center[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn predict_matches_manual_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = center_cols(randn(&mut rng, 20, 4));
        let y = center_cols(randn(&mut rng, 20, 2));
        let mut fit = simpls_fit(x.view(), y.view(), 2).unwrap();
        fit.x_center = array![0.5, -0.5, 1.0, 0.0];
        fit.x_scale = array![2.0, 1.0, 0.5, 1.5];
        fit.y_center = array![3.0, -4.0];
        let x_new = randn(&mut rng, 5, 4);
        let pred = pls_predict(&fit, x_new.view()).unwrap();
        for i in 0..5 {
            for jq in 0..2 {
                let mut acc = 0.0;
                for jp in 0..4 {
                    acc += (x_new[[i, jp]] - fit.x_center[jp]) / fit.x_scale[jp]
                        * fit.coefficients[[jp, jq]];
                }
                acc += fit.y_center[jq];
                assert_abs_diff_eq!(pred[[i, jq]], acc, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn unit_weight_mean_centered_reweighted_fit_collapses_to_plain_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = randn(&mut rng, 24, 5) + 1.5;
        let b = randn(&mut rng, 5, 2);
        let y = x.dot(&b) + 0.1 * randn(&mut rng, 24, 2);
        let n = 24;
        let config = IrsimplsConfig {
            n_components: 3,
            subsample_size: Some(n),
            n_starts: 1,
            max_reweight_iters: 0,
            center: CenterMethod::ColumnMean,
            scale_x: false,
            force_unit_weights: true,
            ..IrsimplsConfig::new(3, 11)
        };
        let robust = irsimpls_fit(x.view(), y.view(), &config).unwrap();
        let xc = center_cols(x.clone());
        let yc = center_cols(y.clone());
        let plain = simpls_fit(xc.view(), yc.view(), 3).unwrap();
        for (a, b) in robust.coefficients.iter().zip(plain.coefficients.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn clean_data_reweighted_fit_stays_near_plain_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 80;
        let x = randn(&mut rng, n, 6);
        let b = randn(&mut rng, 6, 2);
        let y = x.dot(&b) + 0.3 * randn(&mut rng, n, 2);
        let config = IrsimplsConfig {
            scale_x: false,
            ..IrsimplsConfig::new(4, 5)
        };
        let robust = irsimpls_fit(x.view(), y.view(), &config).unwrap();
        let xc = center_cols(x.clone());
        let yc = center_cols(y.clone());
        let plain = simpls_fit(xc.view(), yc.view(), 4).unwrap();
        let num = (&robust.coefficients - &plain.coefficients)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let den = plain.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 0.10, "relative gap {}", num / den);
    }

    #[test]
    fn planted_row_outliers_are_downweighted() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 60;
        let x = randn(&mut rng, n, 5);
        let b = randn(&mut rng, 5, 2);
        let mut y = x.dot(&b) + 0.2 * randn(&mut rng, n, 2);
        let outliers: Vec<usize> = (0..12).map(|i| i * 5).collect();
        for &i in &outliers {
            for j in 0..2 {
                y[[i, j]] += 25.0;
            }
        }
        let fit = irsimpls_fit(x.view(), y.view(), &IrsimplsConfig::new(3, 99)).unwrap();
        let mean = |idx: &[usize]| -> f64 {
            idx.iter().map(|&i| fit.obs_weights.weights[i]).sum::<f64>() / idx.len() as f64
        };
        let clean: Vec<usize> = (0..n).filter(|i| !outliers.contains(i)).collect();
        assert!(
            mean(&outliers) < mean(&clean),
            "outlier mean weight {} vs clean {}",
            mean(&outliers),
            mean(&clean)
        );
    }

    #[test]
    fn reweighted_fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = randn(&mut rng, 40, 5);
        let b = randn(&mut rng, 5, 2);
        let y = x.dot(&b) + 0.2 * randn(&mut rng, 40, 2);
        let config = IrsimplsConfig::new(2, 7);
        let f1 = irsimpls_fit(x.view(), y.view(), &config).unwrap();
        let f2 = irsimpls_fit(x.view(), y.view(), &config).unwrap();
        assert_eq!(f1.coefficients, f2.coefficients);
        assert_eq!(f1.obs_weights.weights, f2.obs_weights.weights);
        assert_eq!(f1.objective, f2.objective);
    }

    #[test]
    fn power_iteration_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..5 {
            let a = randn(&mut rng, 6, 6);
            let m = a.t().dot(&a);
            let u = dominant_eigenvector(&m);
            let (values, vectors) = crate::linalg::sym_eigen(&m).unwrap();
            let dominant = vectors.column(5).to_owned();
            let cosine = u.dot(&dominant).abs();
            assert_abs_diff_eq!(cosine, 1.0, epsilon = 1e-8);
            // Rayleigh quotient reproduces the top eigenvalue.
            assert_abs_diff_eq!(u.dot(&m.dot(&u)), values[5], epsilon = 1e-6 * values[5].abs());
        }
    }
}
