mod common;

use common::*;
use ilaplace::models::{glmm_joint_neg_log, BinaryGlmm};
use ilaplace::{glmm_marginal_loglik, EngineOptions};

fn data(n: usize, seed: u64) -> BinaryGlmm {
    BinaryGlmm::simulate(n, 0.5, 1.0, seed).unwrap()
}

#[test]
fn factorizes_into_scalar_integrals() {
    let opts = EngineOptions::default();
    for n in [5, 10] {
        let m = data(n, 7);
        for (beta, sigma2) in [(0.5, 1.0), (-1.0, 0.25), (2.0, 4.0)] {
            let v = glmm_marginal_loglik(&m, &[beta], &[sigma2], &opts).unwrap();
            let oracle = glmm_oracle(&m.responses, beta, sigma2);
            assert!((v - oracle).abs() <= 1e-6, "n={n} β={beta} σ²={sigma2}: {v} vs {oracle}");
        }
    }
}

#[test]
fn vanishing_variance_reduces_to_fixed_effect_likelihood() {
    let m = data(10, 3);
    let beta = 0.3;
    let v = glmm_marginal_loglik(&m, &[beta], &[1e-6], &EngineOptions::default()).unwrap();
    let oracle = glmm_oracle(&m.responses, beta, 1e-6);
    let at_zero: f64 = m
        .responses
        .iter()
        .map(|&y| bernoulli_logit_loglik(y, beta))
        .sum();
    assert!((v - oracle).abs() <= 1e-6, "{v} vs {oracle}");
    assert!((v - at_zero).abs() <= 1e-5, "{v} vs {at_zero}");
}

#[test]
fn joint_density_matches_direct_formula() {
    let m = data(4, 2);
    let u = [0.3, -0.7, 1.1, 0.0];
    let v = glmm_joint_neg_log(&m, &u).unwrap();
    let expected: f64 = m
        .responses
        .iter()
        .zip(&u)
        .map(|(&y, &ui)| {
            -bernoulli_logit_loglik(y, m.beta + ui)
                + 0.5 * ui * ui / m.sigma2
                + 0.5 * (LN_2PI + m.sigma2.ln())
        })
        .sum();
    assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
}

#[test]
fn gradient_vanishes_at_the_oracle_maximum() {
    let m = BinaryGlmm::simulate(10, 0.5, 1.0, 21).unwrap();
    let sigma2 = 1.0;
    let oracle = |b: f64| {
        m.responses
            .iter()
            .map(|&y| {
                log_trapezoid(
                    |u| bernoulli_logit_loglik(y, b + u) - 0.5 * u * u / sigma2,
                    -30.0,
                    30.0,
                    20_000,
                )
            })
            .sum::<f64>()
    };
    // coarse grid, then golden section on the bracketing cell
    let (b0, _) = grid_argmax(oracle, -4.0, 4.0, 80);
    let (mut a, mut b) = (b0 - 0.1, b0 + 0.1);
    let g = 0.618_033_988_749_895;
    for _ in 0..60 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if oracle(x1) > oracle(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mle = 0.5 * (a + b);

    let opts = EngineOptions::default();
    let step = 1e-4;
    let up = glmm_marginal_loglik(&m, &[mle + step], &[sigma2], &opts).unwrap();
    let down = glmm_marginal_loglik(&m, &[mle - step], &[sigma2], &opts).unwrap();
    let slope = (up - down) / (2.0 * step);
    assert!(slope.abs() <= 1e-3, "derivative {slope} at {mle}");
}

#[test]
fn invalid_variance_is_rejected() {
    let m = data(5, 1);
    assert!(glmm_marginal_loglik(&m, &[0.0], &[0.0], &EngineOptions::default()).is_err());
    assert!(glmm_marginal_loglik(&m, &[0.0], &[-1.0], &EngineOptions::default()).is_err());
}
