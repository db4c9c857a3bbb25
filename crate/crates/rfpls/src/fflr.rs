//! Function-on-function linear regression: response curves regressed on one
//! or more predictor curves through their basis coefficients.
//!
//! Multiplying coefficient rows by the Gram-matrix square roots makes
//! Euclidean inner products of rows equal L2 inner products of curves, so an
//! ordinary multivariate regression of the transformed response block on the
//! transformed predictor block is exactly the functional regression. The
//! coefficient surfaces come back out by undoing the square roots on both
//! sides.

use ndarray::{Array1, Array2, ArrayView2, Axis, s};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::bspline::{BsplineBasis, GramMatrix};
use crate::error::{Result, RfplsError};
use crate::funcdata::{percentage_error_norms, FunctionalSample, Grid};
use crate::linalg::{cholesky_solve, sym_eigen};
use crate::pls::{irsimpls_fit, pls_predict, simpls_fit, IrsimplsConfig, PlsFit};
use crate::robust::{trimmed_mean, WeightVector};
use crate::rng::stream_rng;
use crate::smooth::{smooth_curves, BasisCoefficients};

/// Estimator used for the coefficient-space regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Ordinary least squares: the non-robust, non-regularized reference.
    Ls,
    /// Partial least squares with `n_components` components.
    Simpls,
    /// Iteratively reweighted partial least squares.
    Irsimpls,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            FitMethod::Ls => "ls",
            FitMethod::Simpls => "simpls",
            FitMethod::Irsimpls => "irsimpls",
        };
        f.write_str(name)
    }
}

/// The two design blocks of the coefficient-space regression, with the
/// column ranges occupied by each predictor.
#[derive(Debug, Clone)]
pub struct DesignPair {
    /// `n x K_y`: response coefficients times the response Gram square root.
    pub response: Array2<f64>,
    /// `n x sum(K_x)`: per-predictor coefficients times their Gram square
    /// roots, concatenated.
    pub predictors: Array2<f64>,
    /// Half-open column ranges `(start, end)` of each predictor block.
    pub blocks: Vec<(usize, usize)>,
}

/// Builds the design blocks from smoothed coefficients. Returns the design
/// along with the Gram matrices of every basis (computed once here, reused
/// for surfaces and prediction).
pub fn build_design(
    y_coefs: &BasisCoefficients,
    x_coefs: &[BasisCoefficients],
) -> Result<(DesignPair, GramMatrix, Vec<GramMatrix>)> {
    if x_coefs.is_empty() {
        return Err(RfplsError::invalid("at least one predictor is required"));
    }
    let n = y_coefs.n_curves();
    for (m, c) in x_coefs.iter().enumerate() {
        if c.n_curves() != n {
            return Err(RfplsError::dims(format!(
                "predictor {} has {} curves but the response has {n}",
                m + 1,
                c.n_curves()
            )));
        }
    }
    let y_gram = y_coefs.basis.gram()?;
    let response = y_coefs.coefs.dot(&y_gram.sqrt);
    let mut x_grams = Vec::with_capacity(x_coefs.len());
    let mut blocks = Vec::with_capacity(x_coefs.len());
    let total: usize = x_coefs.iter().map(|c| c.basis.num_basis()).sum();
    let mut predictors = Array2::zeros((n, total));
    let mut offset = 0;
    for c in x_coefs {
        let gram = c.basis.gram()?;
        let block = c.coefs.dot(&gram.sqrt);
        let end = offset + c.basis.num_basis();
        predictors.slice_mut(s![.., offset..end]).assign(&block);
        blocks.push((offset, end));
        x_grams.push(gram);
        offset = end;
    }
    Ok((
        DesignPair {
            response,
            predictors,
            blocks,
        },
        y_gram,
        x_grams,
    ))
}

/// Options controlling basis setup and fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FflrOptions {
    pub method: FitMethod,
    /// Components for the PLS methods; ignored by least squares.
    pub n_components: usize,
    pub y_num_basis: usize,
    /// One entry per predictor, or a single entry applied to all.
    pub x_num_basis: Vec<usize>,
    pub order: usize,
    /// Settings for the reweighted method; its component count is overridden
    /// by `n_components`.
    pub irsimpls: IrsimplsConfig,
}

impl Default for FflrOptions {
    fn default() -> Self {
        FflrOptions {
            method: FitMethod::Irsimpls,
            n_components: 3,
            y_num_basis: 10,
            x_num_basis: vec![10],
            order: 4,
            irsimpls: IrsimplsConfig::default(),
        }
    }
}

impl FflrOptions {
    pub fn new(method: FitMethod, n_components: usize) -> Self {
        FflrOptions {
            method,
            n_components,
            ..Default::default()
        }
    }

    fn x_basis_count(&self, m: usize, n_predictors: usize) -> Result<usize> {
        if self.x_num_basis.len() == 1 {
            Ok(self.x_num_basis[0])
        } else if self.x_num_basis.len() == n_predictors {
            Ok(self.x_num_basis[m])
        } else {
            Err(RfplsError::invalid(format!(
                "{} predictor basis counts given for {} predictors",
                self.x_num_basis.len(),
                n_predictors
            )))
        }
    }
}

/// A fitted function-on-function regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FflrModel {
    pub method: FitMethod,
    pub y_basis: BsplineBasis,
    pub x_bases: Vec<BsplineBasis>,
    pub y_gram: GramMatrix,
    pub x_grams: Vec<GramMatrix>,
    pub fit: PlsFit,
    /// `sum(K_x) x K_y` matrix holding, per predictor block, the surface
    /// coefficients `A_m` such that `beta_m(s, t) = psi_m(s)' A_m phi(t)`.
    pub surface_coef: Array2<f64>,
    pub blocks: Vec<(usize, usize)>,
    /// Grid the response was observed on; the default prediction grid.
    pub y_grid: Grid,
    pub warnings: Vec<String>,
}

fn ls_solve(x: &Array2<f64>, y: &Array2<f64>) -> Result<(Array2<f64>, Option<String>)> {
    let xtx = x.t().dot(x);
    let xty = x.t().dot(y);
    match cholesky_solve(&xtx, &xty) {
        Ok(b) => Ok((b, None)),
        Err(_) => {
            // Rank-deficient design: spectral pseudo-inverse, dropping
            // directions with eigenvalues below the relative floor.
            let (values, vectors) = sym_eigen(&xtx)?;
            let p = values.len();
            let lambda_max = values[p - 1].max(0.0);
            if lambda_max <= 0.0 {
                return Err(RfplsError::numerical(
                    "predictor design has no variation; least squares is undefined",
                ));
            }
            let floor = 1e-12 * lambda_max;
            let vt_xty = vectors.t().dot(&xty);
            let mut scaled = vt_xty;
            for (k, mut row) in scaled.rows_mut().into_iter().enumerate() {
                let inv = if values[k] > floor { 1.0 / values[k] } else { 0.0 };
                row.mapv_inplace(|v| v * inv);
            }
            let b = vectors.dot(&scaled);
            Ok((
                b,
                Some(
                    "predictor design is rank deficient; least squares used a spectral pseudo-inverse"
                        .to_string(),
                ),
            ))
        }
    }
}

fn center_rows(mat: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let mean = mat.mean_axis(Axis(0)).expect("nonempty matrix");
    let mut centered = mat.to_owned();
    for mut row in centered.rows_mut() {
        row -= &mean;
    }
    (centered, mean)
}

/// Smooths all variables, builds the coefficient-space design, fits it with
/// the requested method, and assembles the coefficient surfaces.
pub fn fit_fflr(
    y: &FunctionalSample,
    xs: &[FunctionalSample],
    options: &FflrOptions,
) -> Result<FflrModel> {
    if xs.is_empty() {
        return Err(RfplsError::invalid("at least one predictor is required"));
    }
    let n = y.n_curves();
    for (m, x) in xs.iter().enumerate() {
        if x.n_curves() != n {
            return Err(RfplsError::dims(format!(
                "predictor {} has {} curves but the response has {n}",
                m + 1,
                x.n_curves()
            )));
        }
    }
    if n < 2 {
        return Err(RfplsError::invalid("fitting needs at least two curves"));
    }

    let y_basis = BsplineBasis::new(
        options.y_num_basis,
        options.order,
        (y.grid.min(), y.grid.max()),
    )?;
    let y_coefs = smooth_curves(y, &y_basis)?;
    let mut x_bases = Vec::with_capacity(xs.len());
    let mut x_coefs = Vec::with_capacity(xs.len());
    for (m, x) in xs.iter().enumerate() {
        let basis = BsplineBasis::new(
            options.x_basis_count(m, xs.len())?,
            options.order,
            (x.grid.min(), x.grid.max()),
        )?;
        x_coefs.push(smooth_curves(x, &basis)?);
        x_bases.push(basis);
    }
    let (design, y_gram, x_grams) = build_design(&y_coefs, &x_coefs)?;

    let mut warnings = Vec::new();
    let fit = match options.method {
        FitMethod::Ls => {
            let (xc, x_center) = center_rows(design.predictors.view());
            let (yc, y_center) = center_rows(design.response.view());
            let (coefficients, warning) = ls_solve(&xc, &yc)?;
            if let Some(w) = warning {
                warnings.push(w);
            }
            let objective = (&yc - &xc.dot(&coefficients))
                .iter()
                .map(|v| v.abs())
                .sum();
            let p = xc.ncols();
            let q = yc.ncols();
            PlsFit {
                coefficients,
                n_components: 0,
                x_weights: Array2::zeros((p, 0)),
                x_scores: Array2::zeros((n, 0)),
                x_loadings: Array2::zeros((p, 0)),
                y_loadings: Array2::zeros((q, 0)),
                obs_weights: WeightVector {
                    weights: Array1::ones(n),
                    degenerate_columns: Vec::new(),
                },
                converged: true,
                n_reweight_iters: 0,
                objective,
                x_center,
                x_scale: Array1::ones(p),
                y_center,
            }
        }
        FitMethod::Simpls => {
            let (xc, x_center) = center_rows(design.predictors.view());
            let (yc, y_center) = center_rows(design.response.view());
            let mut fit = simpls_fit(xc.view(), yc.view(), options.n_components)?;
            fit.x_center = x_center;
            fit.y_center = y_center;
            fit
        }
        FitMethod::Irsimpls => {
            let config = IrsimplsConfig {
                n_components: options.n_components,
                ..options.irsimpls.clone()
            };
            irsimpls_fit(design.predictors.view(), design.response.view(), &config)?
        }
    };

    // Surfaces live in the unscaled coefficient space: undo the robust
    // column scaling, then the Gram square roots on both sides.
    let mut effective = fit.coefficients.clone();
    for (j, mut row) in effective.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v / fit.x_scale[j]);
    }
    let mut surface_coef = Array2::zeros((design.predictors.ncols(), y_gram.dim()));
    for (m, &(start, end)) in design.blocks.iter().enumerate() {
        let block = effective.slice(s![start..end, ..]);
        let a = x_grams[m].inv_sqrt.dot(&block).dot(&y_gram.inv_sqrt);
        surface_coef.slice_mut(s![start..end, ..]).assign(&a);
    }

    Ok(FflrModel {
        method: options.method,
        y_basis,
        x_bases,
        y_gram,
        x_grams,
        fit,
        surface_coef,
        blocks: design.blocks,
        y_grid: y.grid.clone(),
        warnings,
    })
}

/// Evaluates the fitted coefficient surface of predictor `m` (zero-based) on
/// the outer product of `s_grid` and `t_grid`; entry `(i, j)` is
/// `beta_m(s_i, t_j)`.
pub fn coefficient_surface(
    model: &FflrModel,
    m: usize,
    s_grid: &Grid,
    t_grid: &Grid,
) -> Result<Array2<f64>> {
    let (start, end) = *model.blocks.get(m).ok_or_else(|| {
        RfplsError::invalid(format!(
            "predictor index {m} out of range for {} predictors",
            model.blocks.len()
        ))
    })?;
    let psi = model.x_bases[m].evaluate_matrix(s_grid)?;
    let phi = model.y_basis.evaluate_matrix(t_grid)?;
    let a = model.surface_coef.slice(s![start..end, ..]);
    Ok(psi.dot(&a).dot(&phi.t()))
}

/// Predicts response curves for new predictor curves on `t_grid`: the new
/// curves are smoothed onto the training bases, pushed through the
/// coefficient-space fit, and the predicted coefficients are evaluated on the
/// grid.
pub fn predict_response(
    model: &FflrModel,
    x_new: &[FunctionalSample],
    t_grid: &Grid,
) -> Result<FunctionalSample> {
    if x_new.len() != model.x_bases.len() {
        return Err(RfplsError::dims(format!(
            "model expects {} predictors, got {}",
            model.x_bases.len(),
            x_new.len()
        )));
    }
    let n = x_new[0].n_curves();
    for (m, x) in x_new.iter().enumerate() {
        if x.n_curves() != n {
            return Err(RfplsError::dims(format!(
                "predictor {} has {} curves, expected {n}",
                m + 1,
                x.n_curves()
            )));
        }
    }
    let total: usize = model.x_bases.iter().map(|b| b.num_basis()).sum();
    let mut design = Array2::zeros((n, total));
    for (m, x) in x_new.iter().enumerate() {
        let coefs = smooth_curves(x, &model.x_bases[m])?;
        let block = coefs.coefs.dot(&model.x_grams[m].sqrt);
        let (start, end) = model.blocks[m];
        design.slice_mut(s![.., start..end]).assign(&block);
    }
    let response_block = pls_predict(&model.fit, design.view())?;
    let coefs = response_block.dot(&model.y_gram.inv_sqrt);
    let phi = model.y_basis.evaluate_matrix(t_grid)?;
    let values = coefs.dot(&phi.t());
    FunctionalSample::new(t_grid.clone(), values, "predicted")
}

/// Trimmed mean absolute prediction percentage error of a fit/validate split
/// for each candidate component count, and the argmin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSelection {
    pub n_components: usize,
    /// `scores[h - 1]` is the criterion at `h` components; the vector stops
    /// early if larger counts were not fittable.
    pub scores: Vec<f64>,
}

pub(crate) fn take_rows(sample: &FunctionalSample, idx: &[usize]) -> FunctionalSample {
    FunctionalSample {
        grid: sample.grid.clone(),
        values: sample.values.select(Axis(0), idx),
        label: sample.label.clone(),
    }
}

/// Selects the component count minimizing the trimmed mean of per-curve
/// percentage errors on a random half split: fit on `ceil(n/2)` curves,
/// validate on the rest, keep the smallest `floor(q * n_val)` errors. Ties
/// break toward fewer components.
pub fn select_ncomp_tmape(
    y: &FunctionalSample,
    xs: &[FunctionalSample],
    options: &FflrOptions,
    h_max: usize,
    q: f64,
    split_seed: u64,
) -> Result<ComponentSelection> {
    if h_max < 1 {
        return Err(RfplsError::invalid("h_max must be at least 1"));
    }
    let n = y.n_curves();
    if n < 4 {
        return Err(RfplsError::invalid(
            "component selection needs at least four curves",
        ));
    }
    if options.method == FitMethod::Ls {
        return Err(RfplsError::invalid(
            "component selection applies to the PLS methods only",
        ));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(split_seed, 0);
    indices.shuffle(&mut rng);
    let n_fit = n.div_ceil(2);
    let mut fit_idx = indices[..n_fit].to_vec();
    let mut val_idx = indices[n_fit..].to_vec();
    fit_idx.sort_unstable();
    val_idx.sort_unstable();

    let y_fit = take_rows(y, &fit_idx);
    let y_val = take_rows(y, &val_idx);
    let xs_fit: Vec<FunctionalSample> = xs.iter().map(|x| take_rows(x, &fit_idx)).collect();
    let xs_val: Vec<FunctionalSample> = xs.iter().map(|x| take_rows(x, &val_idx)).collect();

    let mut scores = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let mut opts = options.clone();
        opts.n_components = h;
        let model = match fit_fflr(&y_fit, &xs_fit, &opts) {
            Ok(m) => m,
            Err(RfplsError::RankExceeded { .. }) if h > 1 => break,
            Err(e) => return Err(e),
        };
        let pred = predict_response(&model, &xs_val, &y.grid)?;
        let errors = percentage_error_norms(y_val.values.view(), pred.values.view(), &y.grid)?;
        scores.push(trimmed_mean(&errors, q)?);
    }
    let mut best_h = 1;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best_h - 1] {
            best_h = i + 1;
        }
    }
    Ok(ComponentSelection {
        n_components: best_h,
        scores,
    })
}

/// Self-describing serialized model.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: FflrModel,
}

const MODEL_FORMAT: &str = "rfpls-model";
const MODEL_VERSION: u32 = 1;

/// Writes a model as a self-describing JSON document.
pub fn save_model(path: &Path, model: &FflrModel) -> Result<()> {
    let doc = ModelDocument {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| RfplsError::numerical(format!("model serialization failed: {e}")))?;
    std::fs::write(path, json).map_err(|e| RfplsError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<FflrModel> {
    let text = std::fs::read_to_string(path).map_err(|e| RfplsError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let doc: ModelDocument = serde_json::from_str(&text)
        .map_err(|e| RfplsError::parse(path.display().to_string(), None, e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(RfplsError::parse(
            path.display().to_string(),
            None,
            format!("not a model document (format '{}')", doc.format),
        ));
    }
    if doc.version != MODEL_VERSION {
        return Err(RfplsError::parse(
            path.display().to_string(),
            None,
            format!("unsupported model version {}", doc.version),
        ));
    }
    Ok(doc.model)
}
