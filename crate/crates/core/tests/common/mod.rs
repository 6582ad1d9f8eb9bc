//! Oracles written independently of the library: plain trapezoid sums and
//! grid searches, nothing adaptive.

#![allow(dead_code)]

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log ∫_a^b exp(f)` by the trapezoid rule on `n` panels.
pub fn log_trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let step = (b - a) / n as f64;
    let mut vals: Vec<f64> = (0..=n).map(|i| f(a + i as f64 * step)).collect();
    vals[0] -= 2f64.ln();
    vals[n] -= 2f64.ln();
    log_sum_exp(&vals) + step.ln()
}

/// `log ∫ exp(f)` over the real line for a unimodal `f` whose peak lies in
/// `[-window, window]`: the peak is located on a grid, the range is widened
/// until `f` has dropped by 60, and the trapezoid rule is applied there.
pub fn log_integral_1d(f: impl Fn(f64) -> f64, window: f64, panels: usize) -> f64 {
    let (peak, top) = grid_argmax(&f, -window, window, 20_000);
    let reach = |dir: f64| {
        let mut off = 1e-3;
        while f(peak + dir * off) > top - 60.0 {
            off *= 1.5;
        }
        peak + dir * off
    };
    let (lo, hi) = (reach(-1.0), reach(1.0));
    log_trapezoid(&f, lo, hi, panels)
}

pub fn grid_argmax(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let step = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let t = a + i as f64 * step;
            (t, f(t))
        })
        .fold((a, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best })
}

/// Minimizer of `f` on `[a, b]` by a coarse grid followed by repeated
/// zooming grids around the best point.
pub fn grid_refined_min_1d(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let mut best = a;
    for _ in 0..12 {
        best = grid_argmax(|t| -f(t), lo, hi, 400).0;
        let w = (hi - lo) / 400.0 * 4.0;
        lo = best - w;
        hi = best + w;
    }
    best
}

/// Two-dimensional counterpart of [`grid_refined_min_1d`].
pub fn grid_refined_min_2d(f: impl Fn(f64, f64) -> f64, box_: [(f64, f64); 2]) -> (f64, f64) {
    let [(mut a1, mut b1), (mut a2, mut b2)] = box_;
    let mut best = (a1, a2);
    let n = 200;
    for _ in 0..14 {
        let (s1, s2) = ((b1 - a1) / n as f64, (b2 - a2) / n as f64);
        let mut top = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let p = (a1 + i as f64 * s1, a2 + j as f64 * s2);
                let v = f(p.0, p.1);
                if v < top {
                    top = v;
                    best = p;
                }
            }
        }
        a1 = best.0 - 4.0 * s1;
        b1 = best.0 + 4.0 * s1;
        a2 = best.1 - 4.0 * s2;
        b2 = best.1 + 4.0 * s2;
    }
    best
}

/// Gompertz log-density with `θ = (log α, log β)`, written out term by term.
pub fn gompertz_log_density(theta: [f64; 2], y: f64) -> f64 {
    let alpha = theta[0].exp();
    let beta = theta[1].exp();
    // α - α e^{βy} written as -α (e^{βy} - 1) so large α does not cancel
    (alpha * beta).ln() + beta * y - alpha * (beta * y).exp_m1()
}

/// Negative log posterior with independent `N(0, 100)` priors.
pub fn gompertz_neg_log_posterior(data: &[f64], theta: [f64; 2]) -> f64 {
    let loglik: f64 = data.iter().map(|&y| gompertz_log_density(theta, y)).sum();
    let log_prior: f64 = theta
        .iter()
        .map(|t| -0.5 * t * t / 100.0 - 0.5 * (2.0 * std::f64::consts::PI * 100.0).ln())
        .sum();
    -loglik - log_prior
}

/// Logistic log-likelihood of one binary response.
pub fn bernoulli_logit_loglik(y: bool, eta: f64) -> f64 {
    let p = 1.0 / (1.0 + (-eta).exp());
    if y {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Log marginal likelihood of the binary random-intercept model as a sum of
/// one-dimensional trapezoid integrals.
pub fn glmm_oracle(responses: &[bool], beta: f64, sigma2: f64) -> f64 {
    let sd = sigma2.sqrt();
    responses
        .iter()
        .map(|&y| {
            let f = |u: f64| {
                bernoulli_logit_loglik(y, beta + u)
                    - 0.5 * u * u / sigma2
                    - 0.5 * (LN_2PI + sigma2.ln())
            };
            let lo = -40.0 * sd - 5.0;
            let hi = 40.0 * sd + 5.0;
            log_trapezoid(f, lo, hi, 200_000)
        })
        .sum()
}
