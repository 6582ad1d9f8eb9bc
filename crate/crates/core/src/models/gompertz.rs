//! Posterior of the Gompertz law in log parameters `θ = (log α, log β)`.
//!
//! Per observation, `log p(y; θ) = θ₁ + θ₂ + βy + α - α e^{βy}`, and each
//! component of `θ` has an independent `N(0, prior_sd²)` prior.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::LN_2PI;
use crate::objective::Objective;

pub const DEFAULT_PRIOR_SD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GompertzPosterior {
    pub data: Vec<f64>,
    pub prior_sd: f64,
}

impl GompertzPosterior {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        Self::with_prior_sd(data, DEFAULT_PRIOR_SD)
    }

    pub fn with_prior_sd(data: Vec<f64>, prior_sd: f64) -> Result<Self> {
        if data.iter().any(|y| !(*y >= 0.0 && y.is_finite())) {
            return Err(Error::InvalidParameter(
                "gompertz observations must be finite and non-negative".into(),
            ));
        }
        if !(prior_sd > 0.0 && prior_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior standard deviation must be positive, got {prior_sd}"
            )));
        }
        Ok(Self { data, prior_sd })
    }

    fn prior_var(&self) -> f64 {
        self.prior_sd * self.prior_sd
    }

    /// `(α e^{βy}, α (e^{βy} - 1))`. The product is formed as
    /// `exp(θ₁ + βy)` and the difference through `expm1` while `βy` is
    /// small, so neither overflows early nor cancels.
    fn hazard_terms(theta1: f64, beta: f64, y: f64) -> (f64, f64) {
        let by = beta * y;
        let scaled = (theta1 + by).exp();
        let excess = if by < 1.0 {
            theta1.exp() * by.exp_m1()
        } else {
            scaled - theta1.exp()
        };
        (scaled, excess)
    }

    pub fn neg_log_posterior(&self, theta: &[f64]) -> f64 {
        let (t1, t2) = (theta[0], theta[1]);
        let beta = t2.exp();
        let loglik: f64 = self
            .data
            .iter()
            .map(|&y| t1 + t2 + beta * y - Self::hazard_terms(t1, beta, y).1)
            .sum();
        let v = self.prior_var();
        -loglik + (t1 * t1 + t2 * t2) / (2.0 * v) + (LN_2PI + v.ln())
    }

    pub fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        let (t1, t2) = (theta[0], theta[1]);
        let beta = t2.exp();
        let v = self.prior_var();
        let (mut g1, mut g2) = (t1 / v, t2 / v);
        for &y in &self.data {
            let (scaled, excess) = Self::hazard_terms(t1, beta, y);
            let by = beta * y;
            g1 -= 1.0 - excess;
            g2 -= 1.0 + by - scaled * by;
        }
        DVector::from_vec(vec![g1, g2])
    }

    pub fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let (t1, t2) = (theta[0], theta[1]);
        let beta = t2.exp();
        let v = self.prior_var();
        let (mut h11, mut h12, mut h22) = (1.0 / v, 0.0, 1.0 / v);
        for &y in &self.data {
            let (scaled, excess) = Self::hazard_terms(t1, beta, y);
            let by = beta * y;
            h11 += excess;
            h12 += scaled * by;
            h22 += -by + scaled * by * (1.0 + by);
        }
        DMatrix::from_row_slice(2, 2, &[h11, h12, h12, h22])
    }

    pub fn objective(&self) -> Objective {
        let (m1, m2, m3) = (self.clone(), self.clone(), self.clone());
        Objective::new(2, move |t| m1.neg_log_posterior(t))
            .with_gradient(move |t| m2.gradient(t))
            .with_hessian(move |t| m3.hessian(t))
            .with_gradient_dependencies(vec![vec![0, 1], vec![0, 1]])
    }

    /// Starting point for the mode search.
    pub fn start(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

pub fn gompertz_neg_log_posterior(m: &GompertzPosterior, theta: &[f64]) -> Result<f64> {
    if theta.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite θ {theta:?}")));
    }
    Ok(m.neg_log_posterior(theta))
}

/// Inverse-CDF transform of a uniform draw.
pub fn gompertz_quantile(alpha: f64, beta: f64, u: f64) -> f64 {
    (-(-u).ln_1p() / alpha).ln_1p() / beta
}

/// `F(y) = 1 - exp{α(1 - e^{βy})}`.
pub fn gompertz_cdf(alpha: f64, beta: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    -(-alpha * (beta * y).exp_m1()).exp_m1()
}

/// `n` draws from the Gompertz law, deterministic in `seed`.
pub fn gompertz_sample(alpha: f64, beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gompertz sampler needs positive α, β; got ({alpha}, {beta})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| gompertz_quantile(alpha, beta, rng.random::<f64>()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_observation_at_origin() {
        let m = GompertzPosterior::new(vec![0.0]).unwrap();
        let v = gompertz_neg_log_posterior(&m, &[0.0, 0.0]).unwrap();
        assert!((v - (LN_2PI + 100f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn matches_direct_formula() {
        let data = gompertz_sample(2.0, 3.0, 20, 4).unwrap();
        let m = GompertzPosterior::new(data.clone()).unwrap();
        let theta = [2f64.ln(), 3f64.ln()];
        let (alpha, beta) = (2.0, 3.0);
        let loglik: f64 = data
            .iter()
            .map(|y| (alpha * beta * (beta * y).exp() * alpha.exp() * (-alpha * (beta * y).exp()).exp()).ln())
            .sum();
        let logprior = -(theta[0] * theta[0] + theta[1] * theta[1]) / 200.0 - (2.0 * std::f64::consts::PI * 100.0).ln();
        let expected = -(loglik + logprior);
        let got = m.neg_log_posterior(&theta);
        assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn ridge_values_do_not_cancel() {
        // far along α → ∞, β → 0 the likelihood tends to an exponential law
        let data = vec![0.1, 0.4, 0.25];
        let m = GompertzPosterior::new(data.clone()).unwrap();
        let (t1, t2) = (40.0, -40.0 + 1.5f64.ln());
        let rate: f64 = 1.5;
        let exp_loglik: f64 = data.iter().map(|y| rate.ln() - rate * y).sum();
        let prior = (t1 * t1 + t2 * t2) / 200.0 + (2.0 * std::f64::consts::PI * 100.0).ln();
        assert!((m.neg_log_posterior(&[t1, t2]) - (prior - exp_loglik)).abs() < 1e-9);
        assert!(m.gradient(&[t1, t2]).iter().all(|g| g.abs() < 10.0));
    }

    #[test]
    fn quantile_inversions() {
        assert_eq!(gompertz_quantile(2.0, 3.0, 0.0), 0.0);
        let u = 1.0 - (-2.0f64).exp();
        let y = gompertz_quantile(2.0, 3.0, u);
        assert!((y - 2f64.ln() / 3.0).abs() < 1e-14);
        assert!((gompertz_cdf(2.0, 3.0, y) - u).abs() < 1e-14);
    }

    #[test]
    fn sampler_is_seeded() {
        let a = gompertz_sample(2.0, 3.0, 50, 9).unwrap();
        assert_eq!(a, gompertz_sample(2.0, 3.0, 50, 9).unwrap());
        assert_ne!(a, gompertz_sample(2.0, 3.0, 50, 10).unwrap());
        assert!(a.iter().all(|y| *y >= 0.0));
        assert!(gompertz_sample(0.0, 3.0, 1, 0).is_err());
    }

    #[test]
    fn large_parameters_never_give_nan() {
        let m = GompertzPosterior::new(vec![0.5, 2.0, 3.0]).unwrap();
        for theta in [[5.0, 5.0], [-30.0, 5.5], [20.0, -20.0]] {
            let v = m.neg_log_posterior(&theta);
            assert!(!v.is_nan() && v > 0.0, "{theta:?}: {v}");
        }
        assert!(m.neg_log_posterior(&[1.0, 1.0]).is_finite());
    }

    #[test]
    fn rejects_negative_data() {
        assert!(GompertzPosterior::new(vec![1.0, -0.1]).is_err());
    }
}
