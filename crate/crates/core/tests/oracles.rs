//! Model and engine values checked against independently computed
//! references. Frozen constants were evaluated at 40 significant digits.

use prompt_core::diagnostics::{info_gain_classic, TrueProcess};
use prompt_core::inference::{classic_posterior, metropolis, MetropolisConfig};
use prompt_core::math::{mean_and_se, normal_log_pdf};
use prompt_core::model::{
    binomial_logit_model, discrete_toy_model, gp_model, linear_model, BinomialLogitModel, Design,
    IntervalBox, Model, Observation, Outcome, SharedParam, TaskParam,
};
use prompt_core::rng::seeded_rng;
use prompt_core::synthetic::gen_linear_covariates;
use prompt_core::ParameterGrid;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() < tol, "{a} vs {b} (tolerance {tol})");
}

#[test]
fn binomial_logit_pmf() {
    // log C(10,7) + 7 log s + 3 log(1 − s), s = sigmoid(1.5).
    const EXPECTED: f64 = -1.726_641_037_045_478_1;
    let model = binomial_logit_model();
    let obs = Observation::count(BinomialLogitModel::indicator(1), 7, Some(10));
    let theta = SharedParam::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
    let ll = model
        .log_likelihood(&obs, &theta, &TaskParam::scalar(0.5))
        .unwrap();
    close(ll, EXPECTED, 1e-12);
}

#[test]
fn gp_zero_trajectory() {
    // −½ log det(2π(K + 1e−8·I)) by LU, five evenly spaced inputs on [0, 1].
    const EXPECTED: f64 = -1.870_731_418_390_714_6;
    let model = gp_model((0..5).map(|i| i as f64 / 4.0).collect()).unwrap();
    let obs = Observation::new(Design::default(), Outcome::Vector(vec![0.0; 5]));
    let ll = model
        .log_likelihood(&obs, &SharedParam::scalar(0.3), &TaskParam::scalar(0.5))
        .unwrap();
    close(ll, EXPECTED, 1e-6);
}

#[test]
fn linear_simulate_mean() {
    let model = linear_model();
    let design = Design::new(vec![1.0, 1.0]);
    let mut rng = seeded_rng(11);
    let (theta, psi) = (SharedParam::scalar(-1.0), TaskParam::scalar(2.0));
    let n = 100_000;
    let total: f64 = (0..n)
        .map(|_| {
            model
                .simulate(&design, &theta, &psi, &mut rng)
                .unwrap()
                .outcome
                .as_real()
                .unwrap()
        })
        .sum();
    close(total / n as f64, 1.0, 0.02);
}

#[test]
fn correlated_covariate_means() {
    // E[−4/x'] for x' ~ N(2, 0.25) by quadrature.
    const X2_MEAN: f64 = -2.032_843_945_8;
    let rows = gen_linear_covariates(2.0, 10_000, 5);
    let n = rows.len() as f64;
    close(rows.iter().map(|r| r[0]).sum::<f64>() / n, 2.0, 0.03);
    close(rows.iter().map(|r| r[1]).sum::<f64>() / n, X2_MEAN, 0.02);
    let flat = gen_linear_covariates(0.0, 10_000, 6);
    close(flat.iter().map(|r| r[1]).sum::<f64>() / n, 0.0, 0.02);
}

fn toy_table() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.4, 0.3, 0.2, 0.1]],
        vec![vec![0.25; 4], vec![0.5, 0.125, 0.125, 0.25]],
        vec![vec![0.7, 0.1, 0.1, 0.1], vec![0.05, 0.15, 0.3, 0.5]],
    ]
}

fn counts(ys: &[u64]) -> Vec<Observation> {
    ys.iter()
        .map(|y| Observation::count(vec![], *y, None))
        .collect()
}

#[test]
fn classic_marginal_matches_brute_force() {
    // Sum over all 2⁶ source-ψ assignments.
    const EXPECTED: [f64; 3] = [
        0.655_358_541_444_555_3,
        0.266_399_673_505_431_46,
        0.078_241_785_050_013_235,
    ];
    let model = discrete_toy_model(4, 3, 2, toy_table()).unwrap();
    let grid = ParameterGrid::indexed(vec![0.5, 0.3, 0.2], vec![0.6, 0.4]).unwrap();
    let post = classic_posterior(&model, &counts(&[0, 3, 1, 1, 2, 3]), &grid, &[0.6, 0.4]).unwrap();
    for (a, b) in post.theta_marginal().iter().zip(EXPECTED) {
        close(*a, b, 1e-12);
    }
}

#[test]
fn classic_information_gain_by_enumeration() {
    // Nine datasets, θ* = 0, source ψ* = (0, 1).
    const EXPECTED: f64 = 0.021_820_325_195_507_263;
    let table = vec![
        vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.3, 0.6]],
        vec![vec![0.2, 0.6, 0.2], vec![1.0 / 3.0; 3]],
    ];
    let model = discrete_toy_model(3, 2, 2, table).unwrap();
    let grid = ParameterGrid::indexed(vec![0.6, 0.4], vec![0.5, 0.5]).unwrap();
    let tp = TrueProcess::new(
        &model,
        SharedParam::scalar(0.0),
        vec![TaskParam::scalar(0.0), TaskParam::scalar(1.0)],
        TaskParam::scalar(0.0),
        vec![Design::default(); 2],
    )
    .unwrap();
    let ig = info_gain_classic(&model, &tp, &grid, &[0.5, 0.5], 0, 0).unwrap();
    assert!(ig.exact);
    close(ig.value, EXPECTED, 1e-12);
}

#[test]
fn toy_sampling_frequencies() {
    let table = vec![
        vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.25, 0.25, 0.25, 0.25]],
        vec![vec![0.05, 0.05, 0.6, 0.3], vec![0.4, 0.3, 0.2, 0.1]],
        vec![vec![0.7, 0.1, 0.1, 0.1], vec![0.2, 0.2, 0.2, 0.4]],
    ];
    let model = discrete_toy_model(4, 3, 2, table.clone()).unwrap();
    let mut rng = seeded_rng(17);
    let n = 100_000;
    for (t, by_psi) in table.iter().enumerate() {
        for (p, row) in by_psi.iter().enumerate() {
            let (theta, psi) = (SharedParam::scalar(t as f64), TaskParam::scalar(p as f64));
            let mut seen = [0u64; 4];
            for _ in 0..n {
                let y = model
                    .simulate(&Design::default(), &theta, &psi, &mut rng)
                    .unwrap();
                seen[y.outcome.as_count().unwrap() as usize] += 1;
            }
            let stat: f64 = seen
                .iter()
                .zip(row)
                .map(|(o, q)| {
                    let e = q * n as f64;
                    (*o as f64 - e).powi(2) / e
                })
                .sum();
            let p_value = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
            assert!(p_value > 0.01, "row ({t},{p}): chi2 {stat}, p {p_value}");
        }
    }
}

#[test]
fn metropolis_conjugate_normal() {
    // Prior N(0, 2), five N(μ, 1) observations.
    let ys = [1.2, 0.4, 2.1, 1.7, 0.9];
    let post_var = 1.0 / (1.0 / 4.0 + ys.len() as f64);
    let post_mean = post_var * ys.iter().sum::<f64>();
    let config = MetropolisConfig {
        n_samples: 100_000,
        initial: vec![0.0],
        initial_scales: vec![1.0],
        support: IntervalBox::cube(1, -50.0, 50.0),
        seed: 23,
    };
    let target = |x: &[f64]| {
        normal_log_pdf(x[0], 0.0, 2.0)
            + ys.iter()
                .map(|y| normal_log_pdf(*y, x[0], 1.0))
                .sum::<f64>()
    };
    let chain = metropolis(target, &config, 1).unwrap();
    assert!(chain.warnings.is_empty(), "{:?}", chain.warnings);
    let xs = chain.coordinate(0);
    let batch = |f: &dyn Fn(f64) -> f64| -> (f64, f64) {
        let means: Vec<f64> = xs
            .chunks(2000)
            .map(|c| c.iter().map(|x| f(*x)).sum::<f64>() / c.len() as f64)
            .collect();
        mean_and_se(&means)
    };
    let (m, se) = batch(&|x| x);
    assert!(
        (m - post_mean).abs() < 3.0 * se,
        "mean {m} vs {post_mean}, se {se}"
    );
    let (v, se_v) = batch(&|x| (x - post_mean).powi(2));
    assert!(
        (v - post_var).abs() < 3.0 * se_v,
        "variance {v} vs {post_var}, se {se_v}"
    );
}
