//! Command-line front end: fit, predict, select, bootstrap, simulate, and
//! evaluate subcommands over the library's CSV and JSON formats.
//!
//! Every run resolves its configuration from defaults, an optional JSON
//! config file, and command-line flags (flags win), then echoes the resolved
//! configuration to a manifest that can be fed back via `--config` to
//! reproduce the run byte for byte.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rfpls::bootstrap::{bootstrap_bands, cpd, interval_score, write_band_csv, BootstrapOptions};
use rfpls::fflr::{
    fit_fflr, load_model, predict_response, save_model, select_ncomp_tmape, FflrOptions,
    FitMethod,
};
use rfpls::funcdata::{read_curves_csv, write_curves_csv, FunctionalSample, Grid};
use rfpls::pls::IrsimplsConfig;
use rfpls::simlab::{
    gen_fpc_dataset, mape, mdape, mse_trimmed, r2, read_flags_csv, simulate, write_flags_csv,
    FpcScenario, OuParams, PredictorScenario, ScenarioConfig,
};
use rfpls::RfplsError;

const EXIT_PARSE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 4;

/// Errors split by exit-code class: how the command was invoked versus what
/// the inputs or the numerics did.
enum CliError {
    Usage(String),
    Lib(RfplsError),
}

impl From<RfplsError> for CliError {
    fn from(e: RfplsError) -> Self {
        CliError::Lib(e)
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn lib_exit_code(e: &RfplsError) -> u8 {
    match e {
        RfplsError::Io { .. }
        | RfplsError::Parse { .. }
        | RfplsError::InvalidArgument(_)
        | RfplsError::DimensionMismatch(_) => EXIT_PARSE,
        RfplsError::Numerical(_)
        | RfplsError::NoConvergence(_)
        | RfplsError::DegenerateScale
        | RfplsError::RankExceeded { .. } => EXIT_NUMERICAL,
    }
}

#[derive(Parser)]
#[command(
    name = "rfpls",
    version,
    about = "Robust function-on-function regression over CSV curve files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a regression from response and predictor curve CSVs.
    Fit(FitArgs),
    /// Predict response curves from a saved model.
    Predict(PredictArgs),
    /// Choose the component count by trimmed prediction error.
    Select(SelectArgs),
    /// Fit and build bootstrap prediction bands for test predictors.
    Bootstrap(BootstrapArgs),
    /// Generate a benchmark dataset.
    Simulate(SimulateArgs),
    /// Compare predicted curves against truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Default)]
struct CommonOpts {
    /// JSON configuration (bare config or a manifest from a previous run);
    /// flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the resolved-run manifest. Defaults next to the
    /// primary output.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Ls,
    Simpls,
    Irsimpls,
}

impl MethodArg {
    fn as_str(self) -> &'static str {
        match self {
            MethodArg::Ls => "ls",
            MethodArg::Simpls => "simpls",
            MethodArg::Irsimpls => "irsimpls",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Independent,
    Lagged,
    #[value(name = "fpc_s1")]
    FpcS1,
    #[value(name = "fpc_s2")]
    FpcS2,
}

impl ScenarioArg {
    fn as_str(self) -> &'static str {
        match self {
            ScenarioArg::Independent => "independent",
            ScenarioArg::Lagged => "lagged",
            ScenarioArg::FpcS1 => "fpc_s1",
            ScenarioArg::FpcS2 => "fpc_s2",
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Response curve CSV.
    #[arg(long)]
    response: Option<String>,
    /// Predictor curve CSVs, comma separated.
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// PLS component count.
    #[arg(long)]
    components: Option<usize>,
    /// Basis functions for the response expansion.
    #[arg(long)]
    y_basis: Option<usize>,
    /// Basis functions per predictor (one value, or one per predictor).
    #[arg(long, value_delimiter = ',')]
    x_basis: Vec<usize>,
    /// Spline order (degree + 1).
    #[arg(long)]
    order: Option<usize>,
    /// Weight-smoothing constant of the robust method.
    #[arg(long)]
    gamma: Option<f64>,
    /// Random starts of the robust method.
    #[arg(long)]
    n_starts: Option<usize>,
    /// Rows per random start of the robust method.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the fitted model (JSON).
    #[arg(long)]
    model: Option<String>,
    /// Where to write the fit report (JSON).
    #[arg(long)]
    report: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Fitted model JSON.
    #[arg(long)]
    model: Option<String>,
    /// Predictor curve CSVs, comma separated, in training order.
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    /// Evaluate predictions on this many equally spaced points instead of
    /// the training grid.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Where to write the predicted curves CSV.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Largest component count to try.
    #[arg(long)]
    h_max: Option<usize>,
    /// Kept fraction of per-curve errors in the trimmed mean.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    y_basis: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    x_basis: Vec<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report: Option<String>,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    /// Test predictor CSVs, comma separated, in training order.
    #[arg(long, value_delimiter = ',')]
    test_predictors: Vec<String>,
    /// Test response CSV; when given, coverage metrics are reported.
    #[arg(long)]
    test_response: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    y_basis: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    x_basis: Vec<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    /// Band miscoverage level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Bootstrap replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Re-select the component count per replicate up to this cap.
    #[arg(long)]
    reselect_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the lower-bound curves CSV.
    #[arg(long)]
    lower: Option<String>,
    /// Where to write the upper-bound curves CSV.
    #[arg(long)]
    upper: Option<String>,
    /// Where to write the point predictions CSV (optional).
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    report: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Total curves.
    #[arg(long)]
    n: Option<usize>,
    /// Leading rows forming the training block.
    #[arg(long)]
    n_train: Option<usize>,
    /// Observation points per curve.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Latents shared between neighbouring predictors (lagged scenario).
    #[arg(long)]
    lag: Option<usize>,
    /// Fraction of the training block to contaminate.
    #[arg(long)]
    contamination: Option<f64>,
    /// Measurement-noise standard deviation on training curves.
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    ou_rho: Option<f64>,
    #[arg(long)]
    ou_theta: Option<f64>,
    #[arg(long)]
    ou_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving y.csv, x*.csv, flags.csv, and manifest.json.
    #[arg(long)]
    output_dir: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// True response curves CSV.
    #[arg(long)]
    truth: Option<String>,
    /// Predicted response curves CSV.
    #[arg(long)]
    predictions: Option<String>,
    /// Outlier flags CSV; enables the trimmed mean squared error.
    #[arg(long)]
    flags: Option<String>,
    /// Mask budget of the trimmed mean squared error.
    #[arg(long)]
    trim: Option<f64>,
    #[arg(long)]
    report: Option<String>,
}

/// Fully resolved run parameters: defaults, overlaid by the config file,
/// overlaid by flags. Serialized into every manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    method: String,
    components: usize,
    h_max: usize,
    y_basis: usize,
    x_basis: Vec<usize>,
    order: usize,
    gamma: f64,
    n_starts: usize,
    subsample: Option<usize>,
    q: f64,
    alpha: f64,
    replicates: usize,
    reselect_max: Option<usize>,
    scenario: String,
    n: usize,
    n_train: usize,
    grid_size: Option<usize>,
    lag: usize,
    contamination: f64,
    noise_sd: f64,
    ou_rho: f64,
    ou_theta: f64,
    ou_sigma: f64,
    trim: f64,
    seed: Option<u64>,
    response: Option<String>,
    predictors: Vec<String>,
    test_predictors: Vec<String>,
    test_response: Option<String>,
    truth: Option<String>,
    predictions: Option<String>,
    flags: Option<String>,
    model: Option<String>,
    output: Option<String>,
    output_dir: Option<String>,
    report: Option<String>,
    lower: Option<String>,
    upper: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: "irsimpls".to_string(),
            components: 3,
            h_max: 8,
            y_basis: 10,
            x_basis: vec![10],
            order: 4,
            gamma: 0.2,
            n_starts: 25,
            subsample: None,
            q: 0.8,
            alpha: 0.05,
            replicates: 200,
            reselect_max: None,
            scenario: "independent".to_string(),
            n: 500,
            n_train: 200,
            grid_size: None,
            lag: 4,
            contamination: 0.0,
            noise_sd: 2.0,
            ou_rho: 0.0,
            ou_theta: 18.0,
            ou_sigma: 120.0,
            trim: 0.2,
            seed: None,
            response: None,
            predictors: Vec::new(),
            test_predictors: Vec::new(),
            test_response: None,
            truth: None,
            predictions: None,
            flags: None,
            model: None,
            output: None,
            output_dir: None,
            report: None,
            lower: None,
            upper: None,
        }
    }
}

/// Run record written next to every primary output; `config` can be fed
/// back through `--config`.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    command: String,
    config: RunConfig,
}

const MANIFEST_FORMAT: &str = "rfpls-run";

fn load_config(path: &Path) -> Result<RunConfig, RfplsError> {
    let text = std::fs::read_to_string(path).map_err(|e| RfplsError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| RfplsError::parse(path.display().to_string(), None, e.to_string()))?;
    let config_value = match &value {
        serde_json::Value::Object(map)
            if map.get("format").and_then(|v| v.as_str()) == Some(MANIFEST_FORMAT) =>
        {
            map.get("config").cloned().ok_or_else(|| {
                RfplsError::parse(
                    path.display().to_string(),
                    None,
                    "manifest has no 'config' object",
                )
            })?
        }
        _ => value,
    };
    serde_json::from_value(config_value)
        .map_err(|e| RfplsError::parse(path.display().to_string(), None, e.to_string()))
}

fn resolve_config(common: &CommonOpts) -> Result<RunConfig, RfplsError> {
    match &common.config {
        Some(path) => load_config(path),
        None => Ok(RunConfig::default()),
    }
}

/// Applies `Some` flag values over the config.
macro_rules! override_field {
    ($cfg:expr, $flag:expr) => {
        if let Some(v) = $flag {
            $cfg = v;
        }
    };
}

macro_rules! override_option {
    ($cfg:expr, $flag:expr) => {
        if $flag.is_some() {
            $cfg = $flag;
        }
    };
}

fn parse_method(name: &str) -> Result<FitMethod, RfplsError> {
    match name {
        "ls" => Ok(FitMethod::Ls),
        "simpls" => Ok(FitMethod::Simpls),
        "irsimpls" => Ok(FitMethod::Irsimpls),
        other => Err(RfplsError::invalid(format!(
            "unknown method '{other}' (expected ls, simpls, or irsimpls)"
        ))),
    }
}

fn fflr_options(config: &RunConfig) -> Result<FflrOptions, RfplsError> {
    Ok(FflrOptions {
        method: parse_method(&config.method)?,
        n_components: config.components,
        y_num_basis: config.y_basis,
        x_num_basis: config.x_basis.clone(),
        order: config.order,
        irsimpls: IrsimplsConfig {
            n_components: config.components,
            gamma: config.gamma,
            subsample_size: config.subsample,
            n_starts: config.n_starts,
            rng_seed: config.seed.unwrap_or(0),
            ..IrsimplsConfig::default()
        },
    })
}

fn read_curves(path: &str) -> Result<(FunctionalSample, Vec<String>), RfplsError> {
    read_curves_csv(Path::new(path))
}

fn read_predictor_list(paths: &[String]) -> Result<Vec<FunctionalSample>, RfplsError> {
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        out.push(read_curves(p)?.0);
    }
    Ok(out)
}

fn write_json(path: &str, value: &serde_json::Value) -> Result<(), RfplsError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RfplsError::numerical(format!("report serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| RfplsError::Io {
        path: path.to_string(),
        source: e,
    })
}

/// Writes the manifest to the explicit path, or derives one next to the
/// primary output (`<primary stem>.manifest.json`).
fn write_manifest(
    common: &CommonOpts,
    command: &str,
    config: &RunConfig,
    primary_output: Option<&str>,
) -> Result<(), RfplsError> {
    let path: Option<PathBuf> = match (&common.manifest, primary_output) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(primary)) => Some(PathBuf::from(primary).with_extension("manifest.json")),
        (None, None) => None,
    };
    let Some(path) = path else {
        return Ok(());
    };
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        version: 1,
        command: command.to_string(),
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RfplsError::numerical(format!("manifest serialization failed: {e}")))?;
    std::fs::write(&path, text + "\n").map_err(|e| RfplsError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn weight_summary(weights: &[f64]) -> serde_json::Value {
    let n = weights.len().max(1) as f64;
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = weights.iter().sum::<f64>() / n;
    let below_half = weights.iter().filter(|w| **w < 0.5).count();
    serde_json::json!({
        "min": min,
        "mean": mean,
        "below_half": below_half,
    })
}

fn cmd_fit(args: &FitArgs) -> CliResult {
    let mut config = resolve_config(&args.common)?;
    override_option!(config.response, args.response.clone());
    if !args.predictors.is_empty() {
        config.predictors = args.predictors.clone();
    }
    override_field!(config.method, args.method.map(|m| m.as_str().to_string()));
    override_field!(config.components, args.components);
    override_field!(config.y_basis, args.y_basis);
    if !args.x_basis.is_empty() {
        config.x_basis = args.x_basis.clone();
    }
    override_field!(config.order, args.order);
    override_field!(config.gamma, args.gamma);
    override_field!(config.n_starts, args.n_starts);
    override_option!(config.subsample, args.subsample);
    override_option!(config.seed, args.seed);
    override_option!(config.model, args.model.clone());
    override_option!(config.report, args.report.clone());

    let response = config
        .response
        .clone()
        .ok_or_else(|| usage("--response is required"))?;
    if config.predictors.is_empty() {
        return Err(usage("--predictors is required"));
    }
    let model_path = config
        .model
        .clone()
        .ok_or_else(|| usage("--model output path is required"))?;

    let (y, _) = read_curves(&response)?;
    let xs = read_predictor_list(&config.predictors)?;
    let options = fflr_options(&config)?;
    let model = fit_fflr(&y, &xs, &options)?;
    save_model(Path::new(&model_path), &model)?;

    let weights: Vec<f64> = model.fit.obs_weights.weights.iter().copied().collect();
    let report = serde_json::json!({
        "method": config.method,
        "components": model.fit.n_components,
        "converged": model.fit.converged,
        "reweight_iterations": model.fit.n_reweight_iters,
        "objective": model.fit.objective,
        "weights": weight_summary(&weights),
        "warnings": model.warnings,
    });
    if let Some(report_path) = &config.report {
        write_json(report_path, &report)?;
    }
    write_manifest(&args.common, "fit", &config, Some(&model_path))?;
    println!(
        "fitted {} with {} components; model written to {}",
        config.method, model.fit.n_components, model_path
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> CliResult {
    let mut config = resolve_config(&args.common)?;
    override_option!(config.model, args.model.clone());
    if !args.predictors.is_empty() {
        config.predictors = args.predictors.clone();
    }
    override_option!(config.grid_size, args.grid_size);
    override_option!(config.output, args.output.clone());

    let model_path = config
        .model
        .clone()
        .ok_or_else(|| usage("--model is required"))?;
    if config.predictors.is_empty() {
        return Err(usage("--predictors is required"));
    }
    let output = config
        .output
        .clone()
        .ok_or_else(|| usage("--output path is required"))?;

    let model = load_model(Path::new(&model_path))?;
    let mut xs = Vec::with_capacity(config.predictors.len());
    let mut ids = Vec::new();
    for (i, p) in config.predictors.iter().enumerate() {
        let (sample, sample_ids) = read_curves(p)?;
        if i == 0 {
            ids = sample_ids;
        }
        xs.push(sample);
    }
    let grid = match config.grid_size {
        Some(p) => Grid::uniform(model.y_grid.min(), model.y_grid.max(), p)?,
        None => model.y_grid.clone(),
    };
    let predictions = predict_response(&model, &xs, &grid)?;
    write_curves_csv(Path::new(&output), &predictions, &ids)?;
    write_manifest(&args.common, "predict", &config, Some(&output))?;
    println!(
        "wrote {} predicted curves to {}",
        predictions.n_curves(),
        output
    );
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> CliResult {
    let mut config = resolve_config(&args.common)?;
    override_option!(config.response, args.response.clone());
    if !args.predictors.is_empty() {
        config.predictors = args.predictors.clone();
    }
    override_field!(config.method, args.method.map(|m| m.as_str().to_string()));
    override_field!(config.h_max, args.h_max);
    override_field!(config.q, args.q);
    override_field!(config.y_basis, args.y_basis);
    if !args.x_basis.is_empty() {
        config.x_basis = args.x_basis.clone();
    }
    override_field!(config.order, args.order);
    override_field!(config.gamma, args.gamma);
    override_field!(config.n_starts, args.n_starts);
    override_option!(config.subsample, args.subsample);
    override_option!(config.seed, args.seed);
    override_option!(config.report, args.report.clone());

    let response = config
        .response
        .clone()
        .ok_or_else(|| usage("--response is required"))?;
    if config.predictors.is_empty() {
        return Err(usage("--predictors is required"));
    }

    let (y, _) = read_curves(&response)?;
    let xs = read_predictor_list(&config.predictors)?;
    let options = fflr_options(&config)?;
    let selection = select_ncomp_tmape(
        &y,
        &xs,
        &options,
        config.h_max,
        config.q,
        config.seed.unwrap_or(0),
    )?;
    let report = serde_json::json!({
        "method": config.method,
        "selected_components": selection.n_components,
        "scores": selection.scores,
        "q": config.q,
    });
    if let Some(report_path) = &config.report {
        write_json(report_path, &report)?;
    }
    write_manifest(&args.common, "select", &config, config.report.as_deref())?;
    println!("selected {} components", selection.n_components);
    for (i, s) in selection.scores.iter().enumerate() {
        println!("  h={} score={s:.6e}", i + 1);
    }
    Ok(())
}

fn cmd_bootstrap(args: &BootstrapArgs) -> CliResult {
    let mut config = resolve_config(&args.common)?;
    override_option!(config.response, args.response.clone());
    if !args.predictors.is_empty() {
        config.predictors = args.predictors.clone();
    }
    if !args.test_predictors.is_empty() {
        config.test_predictors = args.test_predictors.clone();
    }
    override_option!(config.test_response, args.test_response.clone());
    override_field!(config.method, args.method.map(|m| m.as_str().to_string()));
    override_field!(config.components, args.components);
    override_field!(config.y_basis, args.y_basis);
    if !args.x_basis.is_empty() {
        config.x_basis = args.x_basis.clone();
    }
    override_field!(config.order, args.order);
    override_field!(config.gamma, args.gamma);
    override_field!(config.n_starts, args.n_starts);
    override_option!(config.subsample, args.subsample);
    override_field!(config.alpha, args.alpha);
    override_field!(config.replicates, args.replicates);
    override_option!(config.reselect_max, args.reselect_max);
    override_option!(config.seed, args.seed);
    override_option!(config.lower, args.lower.clone());
    override_option!(config.upper, args.upper.clone());
    override_option!(config.output, args.output.clone());
    override_option!(config.report, args.report.clone());

    let response = config
        .response
        .clone()
        .ok_or_else(|| usage("--response is required"))?;
    if config.predictors.is_empty() {
        return Err(usage("--predictors is required"));
    }
    if config.test_predictors.is_empty() {
        return Err(usage("--test-predictors is required"));
    }
    if config.test_predictors.len() != config.predictors.len() {
        return Err(CliError::Lib(RfplsError::dims(format!(
            "{} test predictor files for {} training predictors",
            config.test_predictors.len(),
            config.predictors.len()
        ))));
    }
    let seed = config
        .seed
        .ok_or_else(|| usage("--seed is required for bootstrap"))?;
    let lower_path = config
        .lower
        .clone()
        .ok_or_else(|| usage("--lower output path is required"))?;
    let upper_path = config
        .upper
        .clone()
        .ok_or_else(|| usage("--upper output path is required"))?;

    let (y_train, _) = read_curves(&response)?;
    let xs_train = read_predictor_list(&config.predictors)?;
    let mut xs_test = Vec::with_capacity(config.test_predictors.len());
    let mut test_ids = Vec::new();
    for (i, p) in config.test_predictors.iter().enumerate() {
        let (sample, sample_ids) = read_curves(p)?;
        if i == 0 {
            test_ids = sample_ids;
        }
        xs_test.push(sample);
    }
    let options = fflr_options(&config)?;
    let boot = BootstrapOptions {
        n_replicates: config.replicates,
        alpha: config.alpha,
        seed,
        reselect_max: config.reselect_max,
    };
    let out = bootstrap_bands(&y_train, &xs_train, &xs_test, &options, &boot)?;
    write_band_csv(
        &out.band,
        Path::new(&lower_path),
        Path::new(&upper_path),
        &test_ids,
    )?;
    if let Some(output) = &config.output {
        write_curves_csv(Path::new(output), &out.point_prediction, &test_ids)?;
    }

    let mut report = serde_json::json!({
        "method": config.method,
        "alpha": config.alpha,
        "replicates": out.band.n_replicates,
        "attempts": out.n_attempts,
        "components": out.reference.fit.n_components,
    });
    if let Some(truth_path) = &config.test_response {
        let (y_test, _) = read_curves(truth_path)?;
        let map = report.as_object_mut().expect("report is an object");
        map.insert("cpd".into(), serde_json::json!(cpd(&out.band, &y_test)?));
        map.insert(
            "interval_score".into(),
            serde_json::json!(interval_score(&out.band, &y_test)?),
        );
    }
    if let Some(report_path) = &config.report {
        write_json(report_path, &report)?;
    }
    write_manifest(&args.common, "bootstrap", &config, Some(&lower_path))?;
    println!(
        "wrote {} bands ({} replicates, {} attempts) to {} / {}",
        out.band.lower.nrows(),
        out.band.n_replicates,
        out.n_attempts,
        lower_path,
        upper_path
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    let mut config = resolve_config(&args.common)?;
    override_field!(
        config.scenario,
        args.scenario.map(|s| s.as_str().to_string())
    );
    override_field!(config.n, args.n);
    override_field!(config.n_train, args.n_train);
    override_option!(config.grid_size, args.grid_size);
    override_field!(config.lag, args.lag);
    override_field!(config.contamination, args.contamination);
    override_field!(config.noise_sd, args.noise_sd);
    override_field!(config.ou_rho, args.ou_rho);
    override_field!(config.ou_theta, args.ou_theta);
    override_field!(config.ou_sigma, args.ou_sigma);
    override_option!(config.seed, args.seed);
    override_option!(config.output_dir, args.output_dir.clone());

    let seed = config
        .seed
        .ok_or_else(|| usage("--seed is required for simulate"))?;
    let dir = config
        .output_dir
        .clone()
        .ok_or_else(|| usage("--output-dir is required"))?;
    let dir = PathBuf::from(dir);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Lib(RfplsError::Io {
            path: dir.display().to_string(),
            source: e,
        })
    })?;

    let dataset = match config.scenario.as_str() {
        "independent" | "lagged" => {
            let scenario_config = ScenarioConfig {
                n: config.n,
                n_train: config.n_train,
                grid_size: config.grid_size.unwrap_or(100),
                scenario: if config.scenario == "lagged" {
                    PredictorScenario::Lagged
                } else {
                    PredictorScenario::Independent
                },
                lag: config.lag,
                contamination_rate: config.contamination,
                ou: OuParams {
                    rho: config.ou_rho,
                    theta: config.ou_theta,
                    sigma: config.ou_sigma,
                },
                noise_sd: config.noise_sd,
                seed,
            };
            simulate(&scenario_config)?
        }
        "fpc_s1" | "fpc_s2" => {
            let scenario = if config.scenario == "fpc_s1" {
                FpcScenario::S1
            } else {
                FpcScenario::S2
            };
            gen_fpc_dataset(scenario, config.n, config.grid_size.unwrap_or(200), seed)?
        }
        other => {
            return Err(CliError::Lib(RfplsError::invalid(format!(
                "unknown scenario '{other}' (expected independent, lagged, fpc_s1, or fpc_s2)"
            ))))
        }
    };

    write_curves_csv(&dir.join("y.csv"), &dataset.y, &[])?;
    for (m, x) in dataset.xs.iter().enumerate() {
        write_curves_csv(&dir.join(format!("x{}.csv", m + 1)), x, &[])?;
    }
    write_flags_csv(&dir.join("flags.csv"), &dataset.outlier_flags, &[])?;
    for w in &dataset.warnings {
        eprintln!("warning: {w}");
    }
    let manifest_path = dir.join("manifest.json");
    let common_with_default = CommonOpts {
        config: args.common.config.clone(),
        manifest: Some(
            args.common
                .manifest
                .clone()
                .unwrap_or(manifest_path),
        ),
    };
    write_manifest(&common_with_default, "simulate", &config, None)?;
    println!(
        "wrote {} curves ({} predictors) to {}",
        dataset.y.n_curves(),
        dataset.xs.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> CliResult {
    let mut config = resolve_config(&args.common)?;
    override_option!(config.truth, args.truth.clone());
    override_option!(config.predictions, args.predictions.clone());
    override_option!(config.flags, args.flags.clone());
    override_field!(config.trim, args.trim);
    override_option!(config.report, args.report.clone());

    let truth_path = config
        .truth
        .clone()
        .ok_or_else(|| usage("--truth is required"))?;
    let pred_path = config
        .predictions
        .clone()
        .ok_or_else(|| usage("--predictions is required"))?;

    let (y, _) = read_curves(&truth_path)?;
    let (y_hat, _) = read_curves(&pred_path)?;
    let mut report = serde_json::json!({
        "mape": mape(&y, &y_hat)?,
        "mdape": mdape(&y, &y_hat)?,
        "r2": r2(&y, &y_hat)?,
    });
    if let Some(flags_path) = &config.flags {
        let (flags, _) = read_flags_csv(Path::new(flags_path))?;
        let map = report.as_object_mut().expect("report is an object");
        map.insert(
            "mse_trimmed".into(),
            serde_json::json!(mse_trimmed(&y, &y_hat, &flags, config.trim)?),
        );
    }
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| RfplsError::numerical(format!("report serialization failed: {e}")))?;
    println!("{text}");
    if let Some(report_path) = &config.report {
        write_json(report_path, &report)?;
    }
    write_manifest(&args.common, "evaluate", &config, config.report.as_deref())?;
    Ok(())
}

/// Applies the `RFPLS_THREADS` cap to the global thread pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RFPLS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| usage(format!("RFPLS_THREADS must be a positive integer, got '{raw}'")))?;
    // A second initialization (e.g. in tests) is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    configure_threads()?;
    match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Select(args) => cmd_select(args),
        Command::Bootstrap(args) => cmd_bootstrap(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is a
            // usage error.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(lib_exit_code(&e))
        }
    }
}
