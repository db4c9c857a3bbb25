//! Nonparametric bootstrap prediction bands for response curves, with the
//! coverage-deviance and interval-score metrics used to evaluate them.
//!
//! The reference model is fit once; each replicate refits the same
//! specification on a with-replacement resample of the training pairs,
//! predicts the test predictors, and adds a whole residual curve drawn from
//! the reference residuals. Pointwise empirical quantiles across replicates
//! form the band.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, RfplsError};
use crate::fflr::{
    fit_fflr, predict_response, select_ncomp_tmape, take_rows, FflrModel, FflrOptions,
};
use crate::funcdata::{
    format_float, riemann_l2_norm, write_curves_csv_annotated, FunctionalSample, Grid,
};
use crate::rng::stream_rng;

/// Pointwise prediction band: row `i`, column `j` of `lower`/`upper` bound
/// test curve `i` at grid point `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionBand {
    pub t_grid: Grid,
    pub lower: Array2<f64>,
    pub upper: Array2<f64>,
    pub alpha: f64,
    pub n_replicates: usize,
}

/// Bootstrap controls. `seed` drives every random draw; replicate `b` forks
/// stream `b`, so replicates are order-independent and parallelizable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// When set, every replicate re-selects its component count (up to this
    /// cap) instead of reusing the reference count.
    pub reselect_max: Option<usize>,
}

impl BootstrapOptions {
    pub fn new(seed: u64) -> Self {
        BootstrapOptions {
            n_replicates: 200,
            alpha: 0.05,
            seed,
            reselect_max: None,
        }
    }
}

/// Band plus the reference fit it was built around.
#[derive(Debug, Clone)]
pub struct BootstrapOutput {
    pub band: PredictionBand,
    pub reference: FflrModel,
    /// Reference-model predictions of the test curves.
    pub point_prediction: FunctionalSample,
    /// Total refit attempts consumed (> `n_replicates` when refits failed
    /// and were redrawn).
    pub n_attempts: usize,
}

/// Inverse-ECDF quantile: the `ceil(n * p)`-th smallest of `sorted`.
fn type1_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((n as f64 * p).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Builds a band from replicate prediction matrices by taking pointwise
/// quantiles at `alpha/2` and `1 - alpha/2`.
pub fn band_from_replicates(
    t_grid: &Grid,
    replicates: &[Array2<f64>],
    alpha: f64,
) -> Result<PredictionBand> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RfplsError::invalid(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let b = replicates.len();
    if b < 2 {
        return Err(RfplsError::invalid("at least two replicates are required"));
    }
    let shape = replicates[0].dim();
    if shape.1 != t_grid.len() {
        return Err(RfplsError::dims(format!(
            "replicates have {} columns but the grid has {} points",
            shape.1,
            t_grid.len()
        )));
    }
    for r in replicates {
        if r.dim() != shape {
            return Err(RfplsError::dims("replicates must share one shape"));
        }
    }
    let mut lower = Array2::zeros(shape);
    let mut upper = Array2::zeros(shape);
    let mut column = vec![0.0; b];
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            for (k, r) in replicates.iter().enumerate() {
                column[k] = r[[i, j]];
            }
            column.sort_by(f64::total_cmp);
            lower[[i, j]] = type1_quantile(&column, alpha / 2.0);
            upper[[i, j]] = type1_quantile(&column, 1.0 - alpha / 2.0);
        }
    }
    Ok(PredictionBand {
        t_grid: t_grid.clone(),
        lower,
        upper,
        alpha,
        n_replicates: b,
    })
}

/// Runs attempts `0..cap` until `b` succeed, first pass in parallel. The
/// survivors are the first `b` successes in attempt order, so the result does
/// not depend on scheduling. Returns the replicates and the number of
/// attempts consumed.
fn collect_replicates<F>(b: usize, cap: usize, attempt: F) -> Result<(Vec<Array2<f64>>, usize)>
where
    F: Fn(usize) -> Option<Array2<f64>> + Sync,
{
    let first_pass: Vec<Option<Array2<f64>>> = (0..b).into_par_iter().map(&attempt).collect();
    let mut replicates: Vec<Array2<f64>> = first_pass.into_iter().flatten().collect();
    let mut used = b;
    while replicates.len() < b && used < cap {
        if let Some(r) = attempt(used) {
            replicates.push(r);
        }
        used += 1;
    }
    if replicates.len() < b {
        return Err(RfplsError::NoConvergence(format!(
            "only {} of {b} bootstrap refits succeeded within {cap} attempts",
            replicates.len()
        )));
    }
    Ok((replicates, used))
}

/// Fits the reference model, generates bootstrap replicates, and assembles
/// the pointwise prediction band for the test predictors on the training
/// response grid.
pub fn bootstrap_bands(
    y_train: &FunctionalSample,
    xs_train: &[FunctionalSample],
    xs_test: &[FunctionalSample],
    options: &FflrOptions,
    boot: &BootstrapOptions,
) -> Result<BootstrapOutput> {
    if !(boot.alpha > 0.0 && boot.alpha < 1.0) {
        return Err(RfplsError::invalid(format!(
            "alpha must be in (0, 1), got {}",
            boot.alpha
        )));
    }
    if boot.n_replicates < 2 {
        return Err(RfplsError::invalid("at least two replicates are required"));
    }
    let reference = fit_fflr(y_train, xs_train, options)?;
    let fitted = predict_response(&reference, xs_train, &y_train.grid)?;
    let residuals = &y_train.values - &fitted.values;
    let point_prediction = predict_response(&reference, xs_test, &y_train.grid)?;

    let n_train = y_train.n_curves();
    let n_test = xs_test[0].n_curves();
    let b = boot.n_replicates;

    let attempt = |index: usize| -> Option<Array2<f64>> {
        let mut rng = stream_rng(boot.seed, index as u64);
        // Draw everything up front so the stream layout is independent of
        // how the refit proceeds.
        let refit_seed: u64 = rng.random();
        let split_seed: u64 = rng.random();
        let idx: Vec<usize> = (0..n_train).map(|_| rng.random_range(0..n_train)).collect();
        let residual_idx: Vec<usize> =
            (0..n_test).map(|_| rng.random_range(0..n_train)).collect();

        let y_b = take_rows(y_train, &idx);
        let xs_b: Vec<FunctionalSample> = xs_train.iter().map(|x| take_rows(x, &idx)).collect();
        let mut opts_b = options.clone();
        opts_b.irsimpls.rng_seed = refit_seed;
        if let Some(h_max) = boot.reselect_max {
            let sel = select_ncomp_tmape(&y_b, &xs_b, &opts_b, h_max, 0.8, split_seed).ok()?;
            opts_b.n_components = sel.n_components;
        }
        let model_b = fit_fflr(&y_b, &xs_b, &opts_b).ok()?;
        let mut pred = predict_response(&model_b, xs_test, &y_train.grid).ok()?.values;
        for (i, &r) in residual_idx.iter().enumerate() {
            let mut row = pred.row_mut(i);
            row += &residuals.row(r);
        }
        Some(pred)
    };

    let (replicates, n_attempts) = collect_replicates(b, 3 * b, attempt)?;
    let band = band_from_replicates(&y_train.grid, &replicates, boot.alpha)?;
    Ok(BootstrapOutput {
        band,
        reference,
        point_prediction,
        n_attempts,
    })
}

fn check_alignment(band: &PredictionBand, y_test: &FunctionalSample) -> Result<()> {
    if y_test.n_curves() != band.lower.nrows() {
        return Err(RfplsError::invalid(format!(
            "band bounds {} curves but the sample has {}",
            band.lower.nrows(),
            y_test.n_curves()
        )));
    }
    if y_test.grid.len() != band.t_grid.len() {
        return Err(RfplsError::invalid(format!(
            "band grid has {} points but the sample grid has {}",
            band.t_grid.len(),
            y_test.grid.len()
        )));
    }
    let range = band.t_grid.max() - band.t_grid.min();
    for (a, c) in band.t_grid.points().iter().zip(y_test.grid.points()) {
        if (a - c).abs() > 1e-12 * range.max(1.0) {
            return Err(RfplsError::invalid(
                "band grid and sample grid differ; evaluate on the band grid",
            ));
        }
    }
    Ok(())
}

/// Coverage probability deviance: the absolute difference between the
/// nominal level `alpha` and the empirical non-coverage rate, the latter
/// averaged over all curve/grid-point pairs.
pub fn cpd(band: &PredictionBand, y_test: &FunctionalSample) -> Result<f64> {
    check_alignment(band, y_test)?;
    let mut misses = 0usize;
    let total = y_test.values.len();
    for ((&y, &l), &u) in y_test
        .values
        .iter()
        .zip(band.lower.iter())
        .zip(band.upper.iter())
    {
        if y < l || y > u {
            misses += 1;
        }
    }
    let rate = misses as f64 / total as f64;
    Ok((band.alpha - rate).abs())
}

/// Mean interval score: per curve, the pointwise band width plus `2/alpha`
/// times any exceedance outside the band, reduced over the grid by the
/// L2 norm and averaged over curves.
pub fn interval_score(band: &PredictionBand, y_test: &FunctionalSample) -> Result<f64> {
    check_alignment(band, y_test)?;
    let m = y_test.n_curves();
    let p = y_test.grid.len();
    let penalty_rate = 2.0 / band.alpha;
    let mut total = 0.0;
    let mut pointwise = vec![0.0; p];
    for i in 0..m {
        for j in 0..p {
            let y = y_test.values[[i, j]];
            let l = band.lower[[i, j]];
            let u = band.upper[[i, j]];
            let mut s = u - l;
            if y < l {
                s += penalty_rate * (l - y);
            } else if y > u {
                s += penalty_rate * (y - u);
            }
            pointwise[j] = s;
        }
        total += riemann_l2_norm(ndarray::aview1(&pointwise), &band.t_grid)?;
    }
    Ok(total / m as f64)
}

/// Writes the band as two curve CSVs (one per bound) whose headers record
/// the level and replicate count.
pub fn write_band_csv(
    band: &PredictionBand,
    lower_path: &Path,
    upper_path: &Path,
    ids: &[String],
) -> Result<()> {
    let annotation = format!(
        "alpha={} B={}",
        format_float(band.alpha),
        band.n_replicates
    );
    let lower = FunctionalSample::new(band.t_grid.clone(), band.lower.clone(), "lower")?;
    let upper = FunctionalSample::new(band.t_grid.clone(), band.upper.clone(), "upper")?;
    write_curves_csv_annotated(lower_path, &lower, ids, &annotation)?;
    write_curves_csv_annotated(upper_path, &upper, ids, &annotation)
}
