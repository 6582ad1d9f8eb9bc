mod common;

use common::*;
use ilaplace::models::{gompertz_sample, GompertzPosterior};
use ilaplace::quad::find_support_bounds;
use ilaplace::{
    approx_conditional_minimum, conditional_minimize, minimize, normalize_profile,
    ProfileContext, Strategy,
};

fn posterior(n: usize, seed: u64) -> (Vec<f64>, GompertzPosterior) {
    let data = gompertz_sample(2.0, 3.0, n, seed).unwrap();
    (data.clone(), GompertzPosterior::new(data).unwrap())
}

#[test]
fn value_matches_term_by_term_density() {
    let (data, m) = posterior(20, 1);
    let theta = [2f64.ln(), 3f64.ln()];
    let v = m.objective().evaluate(&theta).unwrap();
    let expected = gompertz_neg_log_posterior(&data, theta);
    assert!((v - expected).abs() <= 1e-12 * (1.0 + expected.abs()), "{v} vs {expected}");
}

#[test]
fn sampler_passes_kolmogorov_smirnov() {
    let n = 10_000;
    let mut draws = gompertz_sample(2.0, 3.0, n, 11).unwrap();
    draws.sort_by(f64::total_cmp);
    let stat = draws
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = 1.0 - (2.0 * (1.0 - (3.0 * y).exp())).exp();
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // asymptotic 1% critical value
    assert!(stat < 1.628 / (n as f64).sqrt(), "KS statistic {stat}");
}

#[test]
fn sample_mean_within_three_standard_errors() {
    let n = 100_000;
    let draws = gompertz_sample(2.0, 3.0, n, 5).unwrap();
    let density = |y: f64| gompertz_log_density([2f64.ln(), 3f64.ln()], y).exp();
    let panels = 200_000;
    let step = 3.0 / panels as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..=panels {
        let y = i as f64 * step;
        let w = if i == 0 || i == panels { 0.5 } else { 1.0 } * step * density(y);
        m1 += w * y;
        m2 += w * y * y;
    }
    let sd = (m2 - m1 * m1).sqrt();
    let mean = draws.iter().sum::<f64>() / n as f64;
    assert!((mean - m1).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {m1}");
}

#[test]
fn mode_matches_grid_search() {
    let (data, m) = posterior(20, 1);
    let mode = minimize(&m.objective(), &m.start(), 1e-10, 200).unwrap();
    let (g1, g2) = grid_refined_min_2d(
        |a, b| gompertz_neg_log_posterior(&data, [a, b]),
        [(-3.0, 3.0), (-3.0, 4.0)],
    );
    assert!((mode.x_hat[0] - g1).abs() < 1e-4, "{} vs {g1}", mode.x_hat[0]);
    assert!((mode.x_hat[1] - g2).abs() < 1e-4, "{} vs {g2}", mode.x_hat[1]);
    let g = m.objective().gradient(mode.x_hat.as_slice()).unwrap();
    assert!(g.amax() <= 1e-10 * (1.0 + mode.h_hat.abs()) || g.amax() < 1e-7);
}

#[test]
fn hessian_at_mode_matches_finite_differences() {
    let (_, m) = posterior(20, 1);
    let obj = m.objective();
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let x = mode.x_hat.as_slice();
    let analytic = obj.hessian(x).unwrap();
    let fd = obj.fd_hessian(x).unwrap();
    assert!((&analytic - &fd).amax() <= 1e-5 * analytic.amax());
}

#[test]
fn conditional_minimum_matches_grid_search() {
    let (data, m) = posterior(20, 1);
    let obj = m.objective();
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let x1 = mode.x_hat[0] + 0.5;
    let z = conditional_minimize(&obj, 1, &[x1], &[mode.x_hat[1]], 1e-10).unwrap();
    let oracle = grid_refined_min_1d(|t| gompertz_neg_log_posterior(&data, [x1, t]), -5.0, 5.0);
    assert!((z[0] - oracle).abs() < 1e-4, "{} vs {oracle}", z[0]);
}

#[test]
fn linearized_conditional_minimum_is_close_at_moderate_n() {
    let (_, m) = posterior(50, 1);
    let obj = m.objective();
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let y = mode.x_hat[0] + 0.3;
    let approx = approx_conditional_minimum(&mode, 1, &[y]).unwrap();
    let exact = conditional_minimize(&obj, 1, &[y], &[mode.x_hat[1]], 1e-10).unwrap();
    assert!((approx[0] - exact[0]).abs() <= 0.05, "{approx} vs {exact}");
    let at_mode = approx_conditional_minimum(&mode, 1, &[mode.x_hat[0]]).unwrap();
    assert_eq!(at_mode[0], mode.x_hat[1]);
}

/// Log marginal density of `θ₁` at `x1` by nested trapezoid sums over a box.
fn log_marginal_density(data: &[f64], x1: f64, h_hat: f64, box_: [(f64, f64); 2], n: usize) -> f64 {
    let [(a1, b1), (a2, b2)] = box_;
    let h = |a: f64, b: f64| h_hat - gompertz_neg_log_posterior(data, [a, b]);
    let slice = log_trapezoid(|t| h(x1, t), a2, b2, 20 * n);
    let s1 = (b1 - a1) / n as f64;
    let outer: Vec<f64> = (0..=n)
        .map(|i| log_trapezoid(|t| h(a1 + i as f64 * s1, t), a2, b2, 2 * n))
        .collect();
    slice - (log_sum_exp(&outer) + s1.ln())
}

#[test]
fn renormalized_marginal_profile_matches_quadrature_marginal() {
    let (data, m) = posterior(50, 1);
    let obj = m.objective();
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let ctx = ProfileContext::new(&obj, &mode, &[0, 1], Strategy::Exact, 1e-10).unwrap();
    let x1 = mode.x_hat[0];
    let log_c = normalize_profile(|t| ctx.log_profile_marginal(t), x1, ctx.scale(0), 1e-10)
        .unwrap()
        .log_value;
    let value = ctx.log_profile_marginal(x1).unwrap() - log_c;
    let truth = log_marginal_density(&data, x1, mode.h_hat, [(-40.0, 80.0), (-80.0, 40.0)], 3000);
    assert!((value - truth).abs() < 2e-2, "{value} vs {truth}");
}

#[test]
fn raw_marginal_profile_is_accurate_for_large_samples() {
    let (data, m) = posterior(1000, 1);
    let obj = m.objective();
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let ctx = ProfileContext::new(&obj, &mode, &[0, 1], Strategy::Exact, 1e-10).unwrap();
    let (x1, x2) = (mode.x_hat[0], mode.x_hat[1]);
    let value = ctx.log_profile_marginal(x1).unwrap();
    let truth = log_marginal_density(
        &data,
        x1,
        mode.h_hat,
        [(x1 - 2.0, x1 + 2.0), (x2 - 2.0, x2 + 2.0)],
        800,
    );
    assert!((value - truth).abs() < 2e-2, "{value} vs {truth}");
}

#[test]
fn last_profile_is_direct_substitution() {
    let (data, m) = posterior(20, 1);
    let obj = m.objective();
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let ctx = ProfileContext::new(&obj, &mode, &[0, 1], Strategy::Exact, 1e-10).unwrap();
    let xd = mode.x_hat[1] + 1.0;
    let v = ctx.log_profile_last(xd).unwrap();
    let (t1, t2) = (mode.x_hat[0], mode.x_hat[1]);
    let expected = gompertz_neg_log_posterior(&data, [t1, t2])
        - gompertz_neg_log_posterior(&data, [t1, xd])
        + 0.5 * (mode.v_hat[(1, 1)].ln() - LN_2PI);
    assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
}

#[test]
fn marginal_profile_constant_matches_dense_trapezoid() {
    let (_, m) = posterior(20, 1);
    let obj = m.objective().with_budget(1 << 40);
    let mode = minimize(&obj, &m.start(), 1e-10, 200).unwrap();
    let ctx = ProfileContext::new(&obj, &mode, &[0, 1], Strategy::Exact, 1e-10).unwrap();
    let center = mode.x_hat[0];
    let scale = ctx.scale(0);
    let quad = normalize_profile(|t| ctx.log_profile_marginal(t), center, scale, 1e-12).unwrap();

    let (lo, hi) =
        find_support_bounds(|t| ctx.log_profile_marginal(t), center, scale, 45.0).unwrap();
    let n = 1_000_000;
    let step = (hi - lo) / n as f64;
    let mut warm = None;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5f64.ln() } else { 0.0 };
            w + ctx.log_profile(0, lo + i as f64 * step, &mut warm).unwrap()
        })
        .collect();
    let trap = log_sum_exp(&vals) + step.ln();
    assert!((quad.log_value - trap).abs() < 1e-8, "{} vs {trap}", quad.log_value);
}
