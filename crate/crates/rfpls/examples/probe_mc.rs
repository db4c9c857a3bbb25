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
        irsimpls: IrsimplsConfig {
            n_components: h,
            rng_seed: seed,
            ..IrsimplsConfig::default()
        },
    }
}

fn run_case(rate: f64, seed0: u64, n_reps: u64) -> Vec<(f64, f64, f64, f64, f64, f64)> {
    let mut out = Vec::new();
    for rep in 0..n_reps {
        let seed = seed0 + rep;
        let config = ScenarioConfig {
            n: 250, n_train: 100, grid_size: 100,
            scenario: PredictorScenario::Independent, lag: 4,
            contamination_rate: rate, ou: OuParams::default(), noise_sd: 2.0, seed,
        };
        let data = simulate(&config).unwrap();
        let (train_y, test_y) = data.split(&data.y);
        let train_xs: Vec<_> = data.xs.iter().map(|x| data.split(x).0).collect();
        let test_xs: Vec<_> = data.xs.iter().map(|x| data.split(x).1).collect();

        let probe = options(FitMethod::Irsimpls, 1, seed);
        let h = select_ncomp_tmape(&train_y, &train_xs, &probe, 5, 0.8, seed).unwrap().n_components;

        let mut row = Vec::new();
        for method in [FitMethod::Ls, FitMethod::Simpls, FitMethod::Irsimpls] {
            let fit = fit_fflr(&train_y, &train_xs, &options(method, h, seed)).unwrap();
            let pred = predict_response(&fit, &test_xs, &test_y.grid).unwrap();
            row.push((mape(&pred, &test_y).unwrap(), r2(&pred, &test_y).unwrap()));
        }
        out.push((row[0].0, row[1].0, row[2].0, row[0].1, row[1].1, row[2].1));
        println!("  rate {rate} rep {rep}: h={h} mape ls {:.4} sim {:.4} ir {:.4} | r2 ls {:.3} sim {:.3} ir {:.3}",
            row[0].0, row[1].0, row[2].0, row[0].1, row[1].1, row[2].1);
    }
    out
}

fn med(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn main() {
    let c1 = run_case(0.0, 10_000, 5);
    let c2 = run_case(0.2, 20_000, 5);
    let m1_ir = med(c1.iter().map(|r| r.2).collect());
    let m2_ls = med(c2.iter().map(|r| r.0).collect());
    let m2_sim = med(c2.iter().map(|r| r.1).collect());
    let m2_ir = med(c2.iter().map(|r| r.2).collect());
    let m1_ls = med(c1.iter().map(|r| r.0).collect());
    let m1_sim = med(c1.iter().map(|r| r.1).collect());
    let wins = c2.iter().filter(|r| r.2 < r.0 && r.2 < r.1).count();
    println!("case1 med: ls {m1_ls:.4} sim {m1_sim:.4} ir {m1_ir:.4}");
    println!("case2 med: ls {m2_ls:.4} sim {m2_sim:.4} ir {m2_ir:.4} | ir wins {wins}/5");
    println!("degradation: ir {:.1}% (bar <=30) ls {:.1}% sim {:.1}% (bar >30)",
        100.0 * (m2_ir / m1_ir - 1.0), 100.0 * (m2_ls / m1_ls - 1.0), 100.0 * (m2_sim / m1_sim - 1.0));
}
