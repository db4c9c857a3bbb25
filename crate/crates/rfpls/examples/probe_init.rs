use rfpls::fflr::{fit_fflr, predict_response, select_ncomp_tmape, FflrOptions, FitMethod};
use rfpls::pls::IrsimplsConfig;
use rfpls::simlab::{mape, r2, simulate, OuParams, PredictorScenario, ScenarioConfig};

fn options(method: FitMethod, h: usize, seed: u64) -> FflrOptions {
    FflrOptions {
        method,
        n_components: h,
        y_num_basis: 10,
        x_num_basis: vec![10; 5],
        order: 4,
        irsimpls: IrsimplsConfig { n_components: h, rng_seed: seed, ..IrsimplsConfig::default() },
    }
}

fn main() {
    let seed = 20_002u64; // case-2 rep 2: ir r2 was -0.74 at h=1
    let config = ScenarioConfig {
        n: 250, n_train: 100, grid_size: 100,
        scenario: PredictorScenario::Independent, lag: 4,
        contamination_rate: 0.2, ou: OuParams::default(), noise_sd: 2.0, seed,
    };
    let data = simulate(&config).unwrap();
    let (train_y, test_y) = data.split(&data.y);
    let train_xs: Vec<_> = data.xs.iter().map(|x| data.split(x).0).collect();
    let test_xs: Vec<_> = data.xs.iter().map(|x| data.split(x).1).collect();

    // Response magnitude structure on the test set
    let vals = &test_y.values;
    let n = vals.nrows();
    let mean = vals.mean_axis(ndarray::Axis(0)).unwrap();
    let mut norm_y = 0.0; let mut norm_dev = 0.0; let mut min_abs: f64 = f64::INFINITY;
    for i in 0..n {
        norm_y += vals.row(i).iter().map(|v| v * v).sum::<f64>() / 100.0;
        norm_dev += vals.row(i).iter().zip(mean.iter()).map(|(v, m)| (v - m) * (v - m)).sum::<f64>() / 100.0;
        min_abs = min_abs.min(vals.row(i).iter().fold(f64::INFINITY, |a, &v| a.min(v.abs())));
    }
    let mean_level: f64 = mean.iter().map(|v| v * v).sum::<f64>() / 100.0;
    println!("test y: mean-sq level {:.3} | mean rowwise E|y|^2 {:.3} | E|y-ybar|^2 {:.3} | min over grid |y| (worst row) {:.4}",
        mean_level, norm_y / n as f64, norm_dev / n as f64, min_abs);

    for h in [1usize, 2, 3, 4, 5] {
        for method in [FitMethod::Ls, FitMethod::Simpls, FitMethod::Irsimpls] {
            let fit = fit_fflr(&train_y, &train_xs, &options(method, h, seed)).unwrap();
            let pred = predict_response(&fit, &test_xs, &test_y.grid).unwrap();
            let m_ab = mape(&test_y, &pred).unwrap();
            let m_ba = mape(&pred, &test_y).unwrap();
            let r = r2(&test_y, &pred).unwrap();
            // mean squared error norm
            let mut mse = 0.0;
            for i in 0..n {
                mse += pred.values.row(i).iter().zip(vals.row(i).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 100.0;
            }
            println!("h={h} {method:?}: mape(truth,pred) {m_ab:.4} mape(pred,truth) {m_ba:.4} r2 {r:.3} | E|err|^2 {:.4}", mse / n as f64);
        }
    }
    let probe = options(FitMethod::Irsimpls, 1, seed);
    let sel = select_ncomp_tmape(&train_y, &train_xs, &probe, 5, 0.8, seed).unwrap();
    println!("tmape scores {:?} -> h={}", sel.scores, sel.n_components);
}
