//! End-to-end tests of the `rfpls` binary: happy paths, the exit-code
//! contract, and manifest-driven reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rfpls"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process not killed by signal")
}

/// Writes a small curves CSV: header row `grid,<points>` then one row per
/// curve id.
fn write_curves(path: &Path, grid: &[f64], rows: &[Vec<f64>]) {
    let mut text = String::from("grid");
    for g in grid {
        text.push_str(&format!(",{g}"));
    }
    text.push('\n');
    for (i, row) in rows.iter().enumerate() {
        text.push_str(&format!("{}", i + 1));
        for v in row {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

/// Simulates a small dataset into `dir` and returns the predictor paths.
fn simulate_small(dir: &Path, seed: u64) -> (PathBuf, Vec<PathBuf>) {
    let out = run(&[
        "simulate",
        "--scenario",
        "independent",
        "--n",
        "40",
        "--n-train",
        "30",
        "--grid-size",
        "25",
        "--seed",
        &seed.to_string(),
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "simulate failed: {}", stderr_of(&out));
    let xs = (1..=5).map(|m| dir.join(format!("x{m}.csv"))).collect();
    (dir.join("y.csv"), xs)
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.to_str().unwrap())
        .collect::<Vec<_>>()
        .join(",")
}

#[test]
fn fit_writes_model_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let (y, xs) = simulate_small(tmp.path(), 41);
    let model = tmp.path().join("model.json");
    let report = tmp.path().join("report.json");
    let out = run(&[
        "fit",
        "--response",
        y.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs),
        "--method",
        "irsimpls",
        "--components",
        "3",
        "--y-basis",
        "8",
        "--x-basis",
        "8",
        "--seed",
        "7",
        "--model",
        model.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    assert!(model.exists(), "model file missing");
    let report_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report_json["components"], 3);
    assert_eq!(report_json["method"], "irsimpls");
    // A manifest lands next to the model by default.
    assert!(tmp.path().join("model.manifest.json").exists());
}

#[test]
fn malformed_csv_exits_2_and_names_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "grid,0.0,0.5,1.0\n1,1.0,2.0,3.0\n2,1.0,oops,3.0\n").unwrap();
    let out = run(&[
        "evaluate",
        "--truth",
        bad.to_str().unwrap(),
        "--predictions",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let msg = stderr_of(&out);
    assert!(msg.contains("row 3"), "message should name the row: {msg}");
}

#[test]
fn overlong_component_request_exits_3_naming_achievable_rank() {
    let tmp = tempfile::tempdir().unwrap();
    // 5 rows but 8 basis functions: achievable rank is at most 4 after
    // centering, so requesting 6 components must fail numerically.
    let (y, xs) = simulate_small(tmp.path(), 13);
    let take5 = |path: &Path, out_path: &Path| {
        let text = fs::read_to_string(path).unwrap();
        let head: Vec<&str> = text.lines().take(6).collect();
        fs::write(out_path, head.join("\n") + "\n").unwrap();
    };
    let tiny_y = tmp.path().join("tiny_y.csv");
    let tiny_x = tmp.path().join("tiny_x.csv");
    take5(&y, &tiny_y);
    take5(&xs[0], &tiny_x);
    let out = run(&[
        "fit",
        "--response",
        tiny_y.to_str().unwrap(),
        "--predictors",
        tiny_x.to_str().unwrap(),
        "--method",
        "simpls",
        "--components",
        "6",
        "--y-basis",
        "6",
        "--x-basis",
        "8",
        "--model",
        tmp.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3, "{}", stderr_of(&out));
    let msg = stderr_of(&out);
    assert!(
        msg.contains("achievable"),
        "message should name the achievable maximum: {msg}"
    );
}

#[test]
fn mismatched_predictor_count_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let (y, xs) = simulate_small(tmp.path(), 29);
    let model = tmp.path().join("model.json");
    let out = run(&[
        "fit",
        "--response",
        y.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs),
        "--method",
        "ls",
        "--y-basis",
        "8",
        "--x-basis",
        "8",
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    // Model was trained on 5 predictors; predicting from 2 must fail as an
    // input inconsistency.
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs[..2]),
        "--output",
        tmp.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2, "{}", stderr_of(&out));
}

#[test]
fn prediction_grid_outside_training_domain_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (y, xs) = simulate_small(tmp.path(), 53);
    let model = tmp.path().join("model.json");
    let out = run(&[
        "fit",
        "--response",
        y.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs),
        "--method",
        "ls",
        "--y-basis",
        "8",
        "--x-basis",
        "8",
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    // Predictor curves observed on [0, 2] cannot be expanded in a basis
    // fitted on [0, 1].
    let wide = tmp.path().join("wide.csv");
    let grid: Vec<f64> = (0..25).map(|i| 2.0 * i as f64 / 24.0).collect();
    let rows: Vec<Vec<f64>> = (0..4).map(|_| vec![1.0; 25]).collect();
    write_curves(&wide, &grid, &rows);
    let wide_list: Vec<PathBuf> = (0..5).map(|_| wide.clone()).collect();
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--predictors",
        &join_paths(&wide_list),
        "--output",
        tmp.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3, "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("domain"));
}

#[test]
fn missing_seed_for_simulate_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--scenario",
        "independent",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 4);
    assert!(stderr_of(&out).contains("seed"));
}

#[test]
fn unknown_flag_exits_4_and_help_exits_0() {
    let out = run(&["fit", "--bogus"]);
    assert_eq!(exit_code(&out), 4);
    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    assert!(stdout_of(&out).contains("fit"));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, "{\"not_a_field\": true}\n").unwrap();
    let out = run(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("not_a_field"));
}

#[test]
fn simulate_is_reproducible_and_manifest_replays_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate_small(&a, 99);
    simulate_small(&b, 99);
    for name in ["y.csv", "x1.csv", "x5.csv", "flags.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs between identically seeded runs"
        );
    }
    // Replaying the echoed manifest reproduces the outputs byte for byte.
    let c = tmp.path().join("c");
    let out = run(&[
        "simulate",
        "--config",
        a.join("manifest.json").to_str().unwrap(),
        "--output-dir",
        c.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    for name in ["y.csv", "x3.csv", "flags.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(c.join(name)).unwrap(),
            "{name} differs after manifest replay"
        );
    }
}

#[test]
fn evaluate_on_perfect_predictions_reports_zero_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (y, _) = simulate_small(tmp.path(), 3);
    let out = run(&[
        "evaluate",
        "--truth",
        y.to_str().unwrap(),
        "--predictions",
        y.to_str().unwrap(),
        "--flags",
        tmp.path().join("flags.csv").to_str().unwrap(),
        "--trim",
        "0.2",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["mape"], 0.0);
    assert_eq!(report["mdape"], 0.0);
    assert_eq!(report["r2"], 1.0);
    assert_eq!(report["mse_trimmed"], 0.0);
}

#[test]
fn end_to_end_pipeline_runs_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let (y, xs) = simulate_small(&data, 2024);
    let model = tmp.path().join("model.json");
    let preds = tmp.path().join("preds.csv");
    let report = tmp.path().join("metrics.json");

    let out = run(&[
        "fit",
        "--response",
        y.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs),
        "--method",
        "irsimpls",
        "--components",
        "3",
        "--y-basis",
        "8",
        "--x-basis",
        "8",
        "--seed",
        "1",
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "fit: {}", stderr_of(&out));

    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs),
        "--output",
        preds.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "predict: {}", stderr_of(&out));

    let out = run(&[
        "evaluate",
        "--truth",
        y.to_str().unwrap(),
        "--predictions",
        preds.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "evaluate: {}", stderr_of(&out));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let mape = metrics["mape"].as_f64().unwrap();
    assert!(mape.is_finite() && mape >= 0.0);
    let r2 = metrics["r2"].as_f64().unwrap();
    assert!(r2 <= 1.0);
}

#[test]
fn select_reports_scores_up_to_h_max() {
    let tmp = tempfile::tempdir().unwrap();
    let (y, xs) = simulate_small(tmp.path(), 77);
    let report = tmp.path().join("sel.json");
    let out = run(&[
        "select",
        "--response",
        y.to_str().unwrap(),
        "--predictors",
        &join_paths(&xs),
        "--method",
        "simpls",
        "--h-max",
        "4",
        "--y-basis",
        "8",
        "--x-basis",
        "8",
        "--seed",
        "5",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    let sel: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let selected = sel["selected_components"].as_u64().unwrap();
    assert!((1..=4).contains(&selected));
    assert_eq!(sel["scores"].as_array().unwrap().len(), 4);
}

#[test]
fn bootstrap_writes_ordered_bands_and_coverage_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let (y, xs) = simulate_small(&data, 404);
    // Split rows 1..=25 for training, 26..=40 for testing.
    let split = |path: &Path, stem: &str| -> (PathBuf, PathBuf) {
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let train = tmp.path().join(format!("train_{stem}.csv"));
        let test = tmp.path().join(format!("test_{stem}.csv"));
        fs::write(&train, lines[..26].join("\n") + "\n").unwrap();
        let mut test_text = vec![lines[0]];
        test_text.extend(&lines[26..]);
        fs::write(&test, test_text.join("\n") + "\n").unwrap();
        (train, test)
    };
    let (train_y, test_y) = split(&y, "y");
    let mut train_xs = Vec::new();
    let mut test_xs = Vec::new();
    for (m, x) in xs.iter().enumerate() {
        let (tr, te) = split(x, &format!("x{}", m + 1));
        train_xs.push(tr);
        test_xs.push(te);
    }
    let lower = tmp.path().join("lower.csv");
    let upper = tmp.path().join("upper.csv");
    let report = tmp.path().join("boot.json");
    let out = run(&[
        "bootstrap",
        "--response",
        train_y.to_str().unwrap(),
        "--predictors",
        &join_paths(&train_xs),
        "--test-predictors",
        &join_paths(&test_xs),
        "--test-response",
        test_y.to_str().unwrap(),
        "--method",
        "simpls",
        "--components",
        "2",
        "--y-basis",
        "8",
        "--x-basis",
        "8",
        "--replicates",
        "30",
        "--alpha",
        "0.1",
        "--seed",
        "6",
        "--lower",
        lower.to_str().unwrap(),
        "--upper",
        upper.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    let boot: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(boot["replicates"], 30);
    let cpd = boot["cpd"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cpd));
    assert!(boot["interval_score"].as_f64().unwrap() >= 0.0);

    // Lower band never exceeds upper band.
    let read_rows = |p: &Path| -> Vec<Vec<f64>> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                line.split(',')
                    .skip(1)
                    .map(|v| v.parse().unwrap())
                    .collect()
            })
            .collect()
    };
    let lo = read_rows(&lower);
    let hi = read_rows(&upper);
    assert_eq!(lo.len(), 15);
    for (lr, hr) in lo.iter().zip(&hi) {
        for (l, h) in lr.iter().zip(hr) {
            assert!(l <= h);
        }
    }

    // A mismatched test-predictor list is an input error.
    let out = run(&[
        "bootstrap",
        "--response",
        train_y.to_str().unwrap(),
        "--predictors",
        &join_paths(&train_xs),
        "--test-predictors",
        &join_paths(&test_xs[..3]),
        "--seed",
        "6",
        "--lower",
        lower.to_str().unwrap(),
        "--upper",
        upper.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2, "{}", stderr_of(&out));
}

#[test]
fn threads_env_must_be_a_positive_integer() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .env("RFPLS_THREADS", "zero")
        .args([
            "simulate",
            "--scenario",
            "independent",
            "--n",
            "10",
            "--n-train",
            "5",
            "--grid-size",
            "10",
            "--seed",
            "1",
            "--output-dir",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 4);
    let out = bin()
        .env("RFPLS_THREADS", "1")
        .args([
            "simulate",
            "--scenario",
            "independent",
            "--n",
            "10",
            "--n-train",
            "5",
            "--grid-size",
            "10",
            "--seed",
            "1",
            "--output-dir",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
}

#[test]
fn fpc_scenarios_write_single_predictor() {
    let tmp = tempfile::tempdir().unwrap();
    for scenario in ["fpc_s1", "fpc_s2"] {
        let dir = tmp.path().join(scenario);
        let out = run(&[
            "simulate",
            "--scenario",
            scenario,
            "--n",
            "30",
            "--grid-size",
            "40",
            "--seed",
            "8",
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
        assert!(dir.join("x1.csv").exists());
        assert!(!dir.join("x2.csv").exists());
        let flags = fs::read_to_string(dir.join("flags.csv")).unwrap();
        let outliers = flags.lines().filter(|l| l.ends_with(",1")).count();
        assert_eq!(outliers, 6, "20% of 30 rows should be flagged");
    }
}

#[test]
fn fit_flags_override_config_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (y, xs) = simulate_small(tmp.path(), 61);
    let cfg = tmp.path().join("cfg.json");
    // Config asks for 2 components; the flag bumps it to 3.
    let config = serde_json::json!({
        "method": "simpls",
        "components": 2,
        "y_basis": 8,
        "x_basis": [8],
        "response": y.to_str().unwrap(),
        "predictors": xs.iter().map(|p| p.to_str().unwrap()).collect::<Vec<_>>(),
        "model": tmp.path().join("m.json").to_str().unwrap(),
    });
    fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    let report = tmp.path().join("r.json");
    let out = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--components",
        "3",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["components"], 3);
    assert_eq!(rep["method"], "simpls");
}
