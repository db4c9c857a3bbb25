//! Simulation lab: seeded data generators for benchmarking the regression
//! methods, with controlled outlier contamination and prediction metrics.
//!
//! Two families are provided. The Gaussian-process family draws five
//! predictor curves (independent or lag-correlated), builds the response by
//! integrating closed-form coefficient surfaces, and contaminates a training
//! subset with Ornstein-Uhlenbeck shifts plus swapped-in surface variants.
//! The principal-component family builds a single predictor from three
//! orthonormal eigenfunctions and perturbs the regression surface itself for
//! the outlying rows.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Result, RfplsError};
use crate::funcdata::{
    absolute_error_norms, percentage_error_norms, riemann_l2_norm, FunctionalSample, Grid,
};
use crate::linalg::cholesky_lower;
use crate::rng::stream_rng;
use crate::robust::median;

/// Number of predictor variables in the Gaussian-process designs.
pub const NUM_PREDICTORS: usize = 5;

/// Mean-reversion parameters of the contamination process.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    /// Long-run level the process decays toward.
    pub rho: f64,
    /// Mean-reversion rate.
    pub theta: f64,
    /// Diffusion scale.
    pub sigma: f64,
}

impl Default for OuParams {
    /// Stationary standard deviation sigma / sqrt(2 theta) = 20 against
    /// unit-variance predictors, so contaminated curves are gross, visible
    /// outliers. Mean reversion is fast enough that each shift varies
    /// within the curve rather than acting as a level offset: a
    /// near-constant shift integrates to almost nothing against the
    /// oscillatory parts of the altered coefficient surfaces, which would
    /// leave the rebuilt responses of outlying rows looking nearly clean.
    fn default() -> Self {
        OuParams {
            rho: 0.0,
            theta: 18.0,
            sigma: 120.0,
        }
    }
}

/// Cross-predictor dependence structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorScenario {
    /// Each predictor gets its own latent process.
    Independent,
    /// Predictor `m` averages latents `m..=m+lag`, so neighbours share
    /// `lag` of their `lag + 1` components.
    Lagged,
}

/// Full specification of a Gaussian-process simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Total curves; the first `n_train` form the training block.
    pub n: usize,
    pub n_train: usize,
    /// Number of equally spaced observation points on [0, 1].
    pub grid_size: usize,
    pub scenario: PredictorScenario,
    /// Number of shared latents per predictor in the lagged scenario.
    pub lag: usize,
    /// Fraction of the training block to contaminate.
    pub contamination_rate: f64,
    pub ou: OuParams,
    /// Standard deviation of the measurement noise added to every training
    /// curve (response and predictors).
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 500,
            n_train: 200,
            grid_size: 100,
            scenario: PredictorScenario::Independent,
            lag: 4,
            contamination_rate: 0.0,
            ou: OuParams::default(),
            noise_sd: 2.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(RfplsError::invalid("n must be at least 2"));
        }
        if self.n_train < 1 || self.n_train > self.n {
            return Err(RfplsError::invalid(format!(
                "n_train must be in 1..={}, got {}",
                self.n, self.n_train
            )));
        }
        if self.grid_size < 2 {
            return Err(RfplsError::invalid("grid_size must be at least 2"));
        }
        if !(0.0..0.5).contains(&self.contamination_rate) {
            return Err(RfplsError::invalid(format!(
                "contamination_rate must be in [0, 0.5), got {}",
                self.contamination_rate
            )));
        }
        if self.ou.theta <= 0.0 {
            return Err(RfplsError::invalid("ou.theta must be positive"));
        }
        if self.ou.sigma < 0.0 {
            return Err(RfplsError::invalid("ou.sigma must be nonnegative"));
        }
        if self.noise_sd < 0.0 {
            return Err(RfplsError::invalid("noise_sd must be nonnegative"));
        }
        Ok(())
    }
}

/// A generated dataset: response, predictors, and which rows were planted
/// as outliers (always within the training block).
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub y: FunctionalSample,
    pub xs: Vec<FunctionalSample>,
    pub outlier_flags: Vec<bool>,
    pub n_train: usize,
    pub warnings: Vec<String>,
}

impl GeneratedDataset {
    /// Splits a sample into its training and test blocks.
    pub fn split(&self, sample: &FunctionalSample) -> (FunctionalSample, FunctionalSample) {
        let train: Vec<usize> = (0..self.n_train).collect();
        let test: Vec<usize> = (self.n_train..sample.n_curves()).collect();
        (
            crate::fflr::take_rows(sample, &train),
            crate::fflr::take_rows(sample, &test),
        )
    }
}

/// Squared-exponential covariance of the latent processes.
pub(crate) fn gp_covariance(grid: &Grid) -> Array2<f64> {
    let pts = grid.points();
    let p = pts.len();
    Array2::from_shape_fn((p, p), |(i, j)| {
        let d = pts[i] - pts[j];
        (-100.0 * d * d).exp()
    })
}

/// Draws `n` mean-zero Gaussian-process curves on the grid. The covariance
/// factorization escalates a diagonal jitter from 1e-10 upward because the
/// squared-exponential kernel is numerically rank deficient.
pub fn gen_gp(n: usize, grid: &Grid, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(RfplsError::invalid("n must be positive"));
    }
    let p = grid.len();
    let base = gp_covariance(grid);
    let mut chol = None;
    let mut jitter = 1e-10;
    while jitter <= 1e-4 {
        let mut k = base.clone();
        for i in 0..p {
            k[[i, i]] += jitter;
        }
        if let Some(l) = cholesky_lower(&k) {
            chol = Some(l);
            break;
        }
        jitter *= 10.0;
    }
    let l = chol.ok_or_else(|| {
        RfplsError::numerical("covariance factorization failed despite diagonal jitter")
    })?;
    let z = Array2::from_shape_fn((n, p), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    Ok(z.dot(&l.t()))
}

/// Generates the five predictor samples on an equally spaced grid over
/// [0, 1]. Latent processes are consumed from `seed` stream 0.
pub fn gen_predictors(config: &ScenarioConfig) -> Result<Vec<FunctionalSample>> {
    config.validate()?;
    let grid = Grid::uniform(0.0, 1.0, config.grid_size)?;
    let mut rng = stream_rng(config.seed, 0);
    let n_latent = match config.scenario {
        PredictorScenario::Independent => NUM_PREDICTORS,
        PredictorScenario::Lagged => NUM_PREDICTORS + config.lag,
    };
    let mut latents = Vec::with_capacity(n_latent);
    for _ in 0..n_latent {
        latents.push(gen_gp(config.n, &grid, &mut rng)?);
    }
    let mut out = Vec::with_capacity(NUM_PREDICTORS);
    for m in 0..NUM_PREDICTORS {
        let values = match config.scenario {
            PredictorScenario::Independent => &latents[m] + 10.0,
            PredictorScenario::Lagged => {
                let scale = 1.0 / ((config.lag + 1) as f64).sqrt();
                let mut acc = Array2::zeros((config.n, config.grid_size));
                for j in 0..=config.lag {
                    acc += &latents[m + j];
                }
                acc * scale + 10.0
            }
        };
        out.push(FunctionalSample::new(
            grid.clone(),
            values,
            format!("x{}", m + 1),
        )?);
    }
    Ok(out)
}

/// Which family of coefficient surfaces drives the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSet {
    Standard,
    Contaminated,
}

/// The five coefficient surfaces of the standard design; `m` is one-based.
pub fn true_beta(m: usize, s: f64, t: f64) -> Result<f64> {
    match m {
        1 => Ok((1.0 - s).powi(2) * (t - 0.5).powi(2)),
        2 => Ok((-3.0 * (s - 1.0).powi(2)).exp() * (-5.0 * (t - 0.5).powi(2)).exp()),
        3 => Ok((-5.0 * (s - 0.5).powi(2) - 5.0 * (t - 0.5).powi(2)).exp()
            + 8.0 * (-5.0 * (s - 1.5).powi(2) - 5.0 * (t - 0.5).powi(2)).exp()),
        4 => Ok((1.5 * PI * s).sin() * (PI * t).sin()),
        5 => Ok((s * t).sqrt()),
        _ => Err(RfplsError::invalid(format!(
            "surface index must be 1..=5, got {m}"
        ))),
    }
}

/// The surfaces used for outlying rows: variants replace surfaces 2-4,
/// surfaces 1 and 5 are kept.
pub fn contaminated_beta(m: usize, s: f64, t: f64) -> Result<f64> {
    match m {
        1 | 5 => true_beta(m, s, t),
        2 => Ok((-3.0 * (s - 1.0).powi(2)).exp() * (-3.0 * (t - 0.5).powi(2)).exp()),
        3 => Ok(6.0 * (-5.0 * (s + 0.5).powi(2) - 5.0 * (t - 0.5).powi(2)).exp()
            + 4.0 * (-5.0 * (s - 1.5).powi(2) - 5.0 * (t - 0.5).powi(2)).exp()),
        4 => Ok(6.0 * (6.0 * PI * s).cos() * (PI * t).cos()),
        _ => Err(RfplsError::invalid(format!(
            "surface index must be 1..=5, got {m}"
        ))),
    }
}

fn beta_value(set: BetaSet, m: usize, s: f64, t: f64) -> Result<f64> {
    match set {
        BetaSet::Standard => true_beta(m, s, t),
        BetaSet::Contaminated => contaminated_beta(m, s, t),
    }
}

/// Evaluates surface `m` of `set` on the outer product of the grids.
fn beta_matrix(set: BetaSet, m: usize, s_grid: &Grid, t_grid: &Grid) -> Result<Array2<f64>> {
    let s_pts = s_grid.points();
    let t_pts = t_grid.points();
    let mut out = Array2::zeros((s_pts.len(), t_pts.len()));
    for (i, &sv) in s_pts.iter().enumerate() {
        for (j, &tv) in t_pts.iter().enumerate() {
            out[[i, j]] = beta_value(set, m, sv, tv)?;
        }
    }
    Ok(out)
}

/// Builds response curves by integrating each predictor against its surface
/// with the grid's Riemann weights, plus optional white observation error.
pub fn gen_response(
    xs: &[FunctionalSample],
    set: BetaSet,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FunctionalSample> {
    if xs.len() != NUM_PREDICTORS {
        return Err(RfplsError::dims(format!(
            "expected {NUM_PREDICTORS} predictors, got {}",
            xs.len()
        )));
    }
    let grid = &xs[0].grid;
    for x in xs.iter().skip(1) {
        if x.grid.points() != grid.points() {
            return Err(RfplsError::invalid("predictors must share one grid"));
        }
    }
    let n = xs[0].n_curves();
    for x in xs {
        if x.n_curves() != n {
            return Err(RfplsError::dims("predictors must have equal curve counts"));
        }
    }
    let w = grid.quadrature_weights();
    let mut values = Array2::zeros((n, grid.len()));
    for (m, x) in xs.iter().enumerate() {
        let surface = beta_matrix(set, m + 1, grid, grid)?;
        let weighted = &x.values * &w; // broadcasts over rows
        values += &weighted.dot(&surface);
    }
    if noise_sd > 0.0 {
        for v in values.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += noise_sd * z;
        }
    }
    FunctionalSample::new(grid.clone(), values, "y")
}

/// One mean-reverting contamination path on the grid, using the exact
/// Gaussian transition between grid points. The path starts at `rho` plus a
/// standard normal draw and decays toward `rho` at rate `theta`.
pub fn ou_curve(grid: &Grid, params: &OuParams, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let pts = grid.points();
    let p = pts.len();
    let mut out = Array1::zeros(p);
    let anchor: f64 = StandardNormal.sample(rng);
    out[0] = params.rho + anchor;
    let stationary_var = params.sigma * params.sigma / (2.0 * params.theta);
    for k in 1..p {
        let dt = pts[k] - pts[k - 1];
        let decay = (-params.theta * dt).exp();
        let var = stationary_var * (1.0 - decay * decay);
        let z: f64 = StandardNormal.sample(rng);
        out[k] = params.rho + (out[k - 1] - params.rho) * decay + var.sqrt() * z;
    }
    out
}

/// Plants outliers in the training block and adds measurement noise to every
/// training curve. Flagged rows get a mean-reverting shift on each predictor
/// and their responses rebuilt through the contaminated surfaces; the test
/// block is untouched. Draws come from `seed` streams 1 (row selection),
/// 2 (shift paths), and 3 (noise).
pub fn contaminate(dataset: GeneratedDataset, config: &ScenarioConfig) -> Result<GeneratedDataset> {
    config.validate()?;
    let GeneratedDataset {
        mut y,
        mut xs,
        mut outlier_flags,
        n_train,
        mut warnings,
    } = dataset;
    if n_train != config.n_train || y.n_curves() != config.n {
        return Err(RfplsError::invalid(
            "dataset shape does not match the configuration",
        ));
    }

    let n_outliers = (config.contamination_rate * n_train as f64).floor() as usize;
    if config.contamination_rate > 0.0 && n_outliers == 0 {
        warnings.push(format!(
            "contamination rate {} over {} training curves floors to zero outliers",
            config.contamination_rate, n_train
        ));
    }
    if n_outliers > 0 {
        let mut select_rng = stream_rng(config.seed, 1);
        let mut flagged = rand::seq::index::sample(&mut select_rng, n_train, n_outliers)
            .into_vec();
        flagged.sort_unstable();
        for &i in &flagged {
            outlier_flags[i] = true;
        }

        let grid = y.grid.clone();
        let mut ou_rng = stream_rng(config.seed, 2);
        for &i in &flagged {
            for x in xs.iter_mut() {
                let shift = ou_curve(&grid, &config.ou, &mut ou_rng);
                let mut row = x.values.row_mut(i);
                row += &shift;
            }
        }

        // Rebuild the flagged responses from the shifted predictors through
        // the contaminated surfaces.
        let w = grid.quadrature_weights();
        for m in 0..NUM_PREDICTORS {
            let surface = beta_matrix(BetaSet::Contaminated, m + 1, &grid, &grid)?;
            for &i in &flagged {
                let weighted = &xs[m].values.row(i) * &w;
                let contribution = weighted.dot(&surface);
                if m == 0 {
                    y.values.row_mut(i).assign(&contribution);
                } else {
                    let mut row = y.values.row_mut(i);
                    row += &contribution;
                }
            }
        }
    }

    if config.noise_sd > 0.0 {
        let mut noise_rng = stream_rng(config.seed, 3);
        let mut add_noise = |values: &mut Array2<f64>| {
            for v in values.slice_mut(s![..n_train, ..]).iter_mut() {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                *v += config.noise_sd * z;
            }
        };
        add_noise(&mut y.values);
        for x in xs.iter_mut() {
            add_noise(&mut x.values);
        }
    }

    Ok(GeneratedDataset {
        y,
        xs,
        outlier_flags,
        n_train,
        warnings,
    })
}

/// Full pipeline: predictors, response, contamination, measurement noise.
pub fn simulate(config: &ScenarioConfig) -> Result<GeneratedDataset> {
    config.validate()?;
    let xs = gen_predictors(config)?;
    let mut rng = stream_rng(config.seed, 4);
    let y = gen_response(&xs, BetaSet::Standard, 0.0, &mut rng)?;
    let clean = GeneratedDataset {
        y,
        xs,
        outlier_flags: vec![false; config.n],
        n_train: config.n_train,
        warnings: Vec::new(),
    };
    contaminate(clean, config)
}

/// Outlier scenario of the principal-component generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpcScenario {
    /// The surface-coefficient matrix is shifted for outlying rows,
    /// distorting the whole domain.
    S1,
    /// The surface gains a narrow spline bump, distorting a short interval.
    S2,
}

fn fpc_x_mean(s: f64) -> f64 {
    -10.0 * (s - 0.5).powi(2) + 2.0
}

fn fpc_y_mean(t: f64) -> f64 {
    60.0 * (-(t - 1.0).powi(2)).exp()
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn fpc_x_eigen(i: usize, s: f64) -> f64 {
    match i {
        0 => SQRT_2 * (PI * s).sin(),
        1 => SQRT_2 * (7.0 * PI * s).sin(),
        2 => SQRT_2 * (7.0 * PI * s).cos(),
        _ => unreachable!("three eigenfunctions"),
    }
}

fn fpc_y_eigen(i: usize, t: f64) -> f64 {
    match i {
        0 => SQRT_2 * (12.0 * PI * t).sin(),
        1 => SQRT_2 * (5.0 * PI * t).sin(),
        2 => SQRT_2 * (2.0 * PI * t).cos(),
        _ => unreachable!("three eigenfunctions"),
    }
}

/// Width of the spline bump the second scenario adds to the surface.
const FPC_BUMP_WIDTH: f64 = 0.1;

/// Cubic B-spline bump supported on `[center, center + 0.1]`, scaled to unit
/// peak.
fn spline_bump(t: f64, center: f64) -> f64 {
    let x = (t - center) / (FPC_BUMP_WIDTH / 4.0);
    let n = if (0.0..1.0).contains(&x) {
        x.powi(3) / 6.0
    } else if (1.0..2.0).contains(&x) {
        (-3.0 * x.powi(3) + 12.0 * x.powi(2) - 12.0 * x + 4.0) / 6.0
    } else if (2.0..3.0).contains(&x) {
        (3.0 * x.powi(3) - 24.0 * x.powi(2) + 60.0 * x - 44.0) / 6.0
    } else if (3.0..=4.0).contains(&x) {
        (4.0 - x).powi(3) / 6.0
    } else {
        0.0
    };
    // The cardinal cubic spline peaks at 2/3; rescale to one.
    1.5 * n
}

/// How outlying rows deviate in the principal-component generator.
enum FpcOutlier {
    /// Replacement surface-coefficient matrix.
    Shifted(Array2<f64>),
    /// Extra response direction: loading vector and bump location.
    Bump(Array1<f64>, f64),
}

/// Assembles predictor and response values from scores and error draws;
/// flagged rows route through the outlier construction.
fn fpc_assemble(
    grid: &Grid,
    scores: &Array2<f64>,
    b: &Array2<f64>,
    q: &Array2<f64>,
    d: &Array1<f64>,
    flags: &[bool],
    outlier: &Option<FpcOutlier>,
) -> (Array2<f64>, Array2<f64>) {
    let pts = grid.points();
    let p = pts.len();
    let n = scores.nrows();
    let x_eigen = Array2::from_shape_fn((3, p), |(i, j)| fpc_x_eigen(i, pts[j]));
    let y_eigen = Array2::from_shape_fn((3, p), |(i, j)| fpc_y_eigen(i, pts[j]));

    let mut x_values = scores.dot(&x_eigen);
    for (j, &t) in pts.iter().enumerate() {
        let mu = fpc_x_mean(t);
        for i in 0..n {
            x_values[[i, j]] += mu;
        }
    }

    // Clean construction: mean + scores through the surface + error.
    let mut y_values = scores.dot(b).dot(&y_eigen) + q.dot(&y_eigen);
    for (j, &t) in pts.iter().enumerate() {
        let mu = fpc_y_mean(t);
        for i in 0..n {
            y_values[[i, j]] += mu + d[i];
        }
    }

    match outlier {
        None => {}
        Some(FpcOutlier::Shifted(b1)) => {
            let shifted = scores.dot(b1).dot(&y_eigen);
            let clean = scores.dot(b).dot(&y_eigen);
            for (i, &flag) in flags.iter().enumerate() {
                if flag {
                    for j in 0..p {
                        y_values[[i, j]] += shifted[[i, j]] - clean[[i, j]];
                    }
                }
            }
        }
        Some(FpcOutlier::Bump(b4, center)) => {
            let bump: Vec<f64> = pts.iter().map(|&t| spline_bump(t, *center)).collect();
            let loading = scores.dot(b4);
            for (i, &flag) in flags.iter().enumerate() {
                if flag {
                    for j in 0..p {
                        y_values[[i, j]] += loading[i] * bump[j];
                    }
                }
            }
        }
    }
    (x_values, y_values)
}

/// Generates the single-predictor principal-component dataset: `n` curves at
/// `grid_size` equispaced points on [0, 1], 20% of rows flagged and routed
/// through the scenario's outlier construction.
pub fn gen_fpc_dataset(
    scenario: FpcScenario,
    n: usize,
    grid_size: usize,
    seed: u64,
) -> Result<GeneratedDataset> {
    if n < 2 {
        return Err(RfplsError::invalid("n must be at least 2"));
    }
    if grid_size < 2 {
        return Err(RfplsError::invalid("grid_size must be at least 2"));
    }
    let grid = Grid::uniform(0.0, 1.0, grid_size)?;

    let mut score_rng = stream_rng(seed, 0);
    let score_sd = [40.0f64.sqrt(), 10.0f64.sqrt(), 1.0];
    let scores = Array2::from_shape_fn((n, 3), |(_, j)| {
        let z: f64 = StandardNormal.sample(&mut score_rng);
        score_sd[j] * z
    });

    let mut b_rng = stream_rng(seed, 1);
    let b = Array2::from_shape_fn((3, 3), |_| b_rng.random_range(-3.0..3.0));

    let mut err_rng = stream_rng(seed, 2);
    let err_sd = 0.1f64.sqrt();
    let q = Array2::from_shape_fn((n, 3), |_| {
        let z: f64 = StandardNormal.sample(&mut err_rng);
        err_sd * z
    });
    let d = Array1::from_shape_fn(n, |_| {
        let z: f64 = StandardNormal.sample(&mut err_rng);
        err_sd * z
    });

    let n_outliers = (0.2 * n as f64).floor() as usize;
    let mut flags = vec![false; n];
    if n_outliers > 0 {
        let mut flag_rng = stream_rng(seed, 3);
        for i in rand::seq::index::sample(&mut flag_rng, n, n_outliers) {
            flags[i] = true;
        }
    }

    let mut outlier_rng = stream_rng(seed, 4);
    let outlier = Some(match scenario {
        FpcScenario::S1 => {
            let shift_sd = 0.5f64.sqrt();
            let r = Array2::from_shape_fn((3, 3), |_| {
                let z: f64 = StandardNormal.sample(&mut outlier_rng);
                shift_sd * z
            });
            FpcOutlier::Shifted(&b + &r)
        }
        FpcScenario::S2 => {
            let b4 = Array1::from_shape_fn(3, |_| {
                let z: f64 = StandardNormal.sample(&mut outlier_rng);
                2.0 + z
            });
            let center = outlier_rng.random_range(0.0..(1.0 - FPC_BUMP_WIDTH));
            FpcOutlier::Bump(b4, center)
        }
    });

    let (x_values, y_values) = fpc_assemble(&grid, &scores, &b, &q, &d, &flags, &outlier);
    Ok(GeneratedDataset {
        y: FunctionalSample::new(grid.clone(), y_values, "y")?,
        xs: vec![FunctionalSample::new(grid, x_values, "x1")?],
        outlier_flags: flags,
        n_train: n,
        warnings: Vec::new(),
    })
}

fn check_metric_inputs(y: &FunctionalSample, y_hat: &FunctionalSample) -> Result<()> {
    if y.n_curves() != y_hat.n_curves() {
        return Err(RfplsError::invalid(format!(
            "{} truth curves vs {} predictions",
            y.n_curves(),
            y_hat.n_curves()
        )));
    }
    if y.grid.len() != y_hat.grid.len()
        || y.grid
            .points()
            .iter()
            .zip(y_hat.grid.points())
            .any(|(a, b)| (a - b).abs() > 1e-12 * (y.grid.max() - y.grid.min()).max(1.0))
    {
        return Err(RfplsError::invalid("grids of truth and prediction differ"));
    }
    Ok(())
}

/// Mean over curves of the L2 norm of the pointwise relative error.
pub fn mape(y: &FunctionalSample, y_hat: &FunctionalSample) -> Result<f64> {
    check_metric_inputs(y, y_hat)?;
    let errors = percentage_error_norms(y.values.view(), y_hat.values.view(), &y.grid)?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Median over curves of the L2 norm of the pointwise absolute error.
pub fn mdape(y: &FunctionalSample, y_hat: &FunctionalSample) -> Result<f64> {
    check_metric_inputs(y, y_hat)?;
    let errors = absolute_error_norms(y.values.view(), y_hat.values.view(), &y.grid)?;
    Ok(median(&errors))
}

/// One minus the ratio of squared prediction error to squared deviation
/// around the mean curve of the truth.
pub fn r2(y: &FunctionalSample, y_hat: &FunctionalSample) -> Result<f64> {
    check_metric_inputs(y, y_hat)?;
    let n = y.n_curves();
    let p = y.grid.len();
    let mean = y
        .values
        .mean_axis(ndarray::Axis(0))
        .expect("nonempty sample");
    let mut num = 0.0;
    let mut den = 0.0;
    let mut diff = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            diff[j] = y.values[[i, j]] - y_hat.values[[i, j]];
        }
        num += riemann_l2_norm(ndarray::aview1(&diff), &y.grid)?.powi(2);
        for j in 0..p {
            diff[j] = y.values[[i, j]] - mean[j];
        }
        den += riemann_l2_norm(ndarray::aview1(&diff), &y.grid)?.powi(2);
    }
    if den <= 0.0 {
        return Err(RfplsError::invalid(
            "truth curves are identical; the determination coefficient is undefined",
        ));
    }
    Ok(1.0 - num / den)
}

/// Mean squared L2 error over unflagged curves, normalized by
/// `(1 - trim) * n` so the masked share is budgeted, not renormalized away.
pub fn mse_trimmed(
    y: &FunctionalSample,
    y_hat: &FunctionalSample,
    flags: &[bool],
    trim: f64,
) -> Result<f64> {
    check_metric_inputs(y, y_hat)?;
    let n = y.n_curves();
    if flags.len() != n {
        return Err(RfplsError::invalid(format!(
            "{} flags for {n} curves",
            flags.len()
        )));
    }
    if !(0.0..1.0).contains(&trim) {
        return Err(RfplsError::invalid(format!(
            "trim must be in [0, 1), got {trim}"
        )));
    }
    let p = y.grid.len();
    let mut total = 0.0;
    let mut diff = vec![0.0; p];
    for i in 0..n {
        if flags[i] {
            continue;
        }
        for j in 0..p {
            diff[j] = y.values[[i, j]] - y_hat.values[[i, j]];
        }
        total += riemann_l2_norm(ndarray::aview1(&diff), &y.grid)?.powi(2);
    }
    Ok(total / ((1.0 - trim) * n as f64))
}

/// Writes outlier flags as a two-column CSV (`id,outlier` with 0/1 values).
pub fn write_flags_csv(path: &Path, flags: &[bool], ids: &[String]) -> Result<()> {
    let path_str = path.display().to_string();
    if !ids.is_empty() && ids.len() != flags.len() {
        return Err(RfplsError::dims(format!(
            "{} ids for {} flags",
            ids.len(),
            flags.len()
        )));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| RfplsError::Io {
        path: path_str.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_record(["id", "outlier"])
        .map_err(|e| RfplsError::Io {
            path: path_str.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    for (i, flag) in flags.iter().enumerate() {
        let id = if ids.is_empty() {
            (i + 1).to_string()
        } else {
            ids[i].clone()
        };
        writer
            .write_record([id.as_str(), if *flag { "1" } else { "0" }])
            .map_err(|e| RfplsError::Io {
                path: path_str.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
    }
    writer.flush().map_err(|e| RfplsError::Io {
        path: path_str,
        source: e,
    })
}

/// Reads a flags CSV written by [`write_flags_csv`].
pub fn read_flags_csv(path: &Path) -> Result<(Vec<bool>, Vec<String>)> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| RfplsError::Io {
            path: path_str.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    let mut flags = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            RfplsError::parse(path_str.clone(), Some(format!("row {}", row + 2)), e.to_string())
        })?;
        if record.len() != 2 {
            return Err(RfplsError::parse(
                path_str,
                Some(format!("row {}", row + 2)),
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        ids.push(record[0].to_string());
        flags.push(match record[1].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(RfplsError::parse(
                    path_str,
                    Some(format!("row {}", row + 2)),
                    format!("outlier flag must be 0 or 1, found '{other}'"),
                ))
            }
        });
    }
    Ok((flags, ids))
}
