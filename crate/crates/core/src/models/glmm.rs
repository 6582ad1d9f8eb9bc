//! Binary random-intercept model: `logit P(y_i = 1) = β + u_i`,
//! `u_i ~ N(0, σ²)` independently.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::LN_2PI;
use crate::objective::Objective;
use crate::quad::normalize_profile;

/// A model whose marginal likelihood integrates a joint density over a
/// vector of random effects.
pub trait GlmmSpec {
    fn random_effect_dim(&self) -> usize;

    /// `u ↦ -log L(θ; u, y) - log f(u; θ_u)`.
    fn joint_objective(&self, theta: &[f64], theta_u: &[f64]) -> Result<Objective>;

    fn random_effect_start(&self) -> Vec<f64> {
        vec![0.0; self.random_effect_dim()]
    }
}

/// `log(1 + e^x)` without overflow or cancellation.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-x})`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGlmm {
    pub responses: Vec<bool>,
    pub beta: f64,
    pub sigma2: f64,
}

impl BinaryGlmm {
    pub fn new(responses: Vec<bool>, beta: f64, sigma2: f64) -> Result<Self> {
        let m = Self {
            responses,
            beta,
            sigma2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.responses.is_empty() {
            return Err(Error::InvalidParameter("glmm needs at least one response".into()));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite β {}", self.beta)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "random-intercept variance must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    /// Draws random intercepts and responses from the model, deterministic
    /// in `seed`.
    pub fn simulate(n: usize, beta: f64, sigma2: f64, seed: u64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "random-intercept variance must be positive, got {sigma2}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma2.sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let responses = (0..n)
            .map(|_| {
                let u = normal.sample(&mut rng);
                rng.random::<f64>() < logistic(beta + u)
            })
            .collect();
        Self::new(responses, beta, sigma2)
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    fn term(y: bool, eta: f64) -> f64 {
        log1p_exp(eta) - if y { eta } else { 0.0 }
    }

    pub fn neg_log_joint(&self, u: &[f64]) -> f64 {
        let (b, s2) = (self.beta, self.sigma2);
        let n = self.n() as f64;
        let data: f64 = self
            .responses
            .iter()
            .zip(u)
            .map(|(&y, &ui)| Self::term(y, b + ui))
            .sum();
        let prior: f64 = u.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2);
        data + prior + 0.5 * n * (LN_2PI + s2.ln())
    }

    pub fn gradient(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            u.len(),
            self.responses.iter().zip(u).map(|(&y, &ui)| {
                logistic(self.beta + ui) - if y { 1.0 } else { 0.0 } + ui / self.sigma2
            }),
        )
    }

    pub fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let diag = DVector::from_iterator(
            u.len(),
            u.iter().map(|&ui| {
                let p = logistic(self.beta + ui);
                p * (1.0 - p) + 1.0 / self.sigma2
            }),
        );
        DMatrix::from_diagonal(&diag)
    }

    pub fn objective(&self) -> Objective {
        let (m1, m2, m3) = (self.clone(), self.clone(), self.clone());
        let n = self.n();
        Objective::new(n, move |u| m1.neg_log_joint(u))
            .with_gradient(move |u| m2.gradient(u))
            .with_hessian(move |u| m3.hessian(u))
            .with_gradient_dependencies((0..n).map(|i| vec![i]).collect())
    }

    /// Log marginal likelihood as a sum of independent scalar integrals,
    /// one per random intercept.
    pub fn factorized_log_marginal(&self, rel_tol: f64) -> Result<f64> {
        let (b, s2) = (self.beta, self.sigma2);
        let mut total = 0.0;
        for &y in &self.responses {
            let g = |u: f64| Self::term(y, b + u) + u * u / (2.0 * s2) + 0.5 * (LN_2PI + s2.ln());
            let mut u = 0.0;
            for _ in 0..100 {
                let p = logistic(b + u);
                let step = (p - if y { 1.0 } else { 0.0 } + u / s2) / (p * (1.0 - p) + 1.0 / s2);
                u -= step;
                if step.abs() <= 1e-14 * (1.0 + u.abs()) {
                    break;
                }
            }
            let p = logistic(b + u);
            let scale = (p * (1.0 - p) + 1.0 / s2).recip().sqrt();
            total += normalize_profile(|t| Ok(-g(t)), u, scale, rel_tol)?.log_value;
        }
        Ok(total)
    }
}

impl GlmmSpec for BinaryGlmm {
    fn random_effect_dim(&self) -> usize {
        self.n()
    }

    /// `theta = [β]`, `theta_u = [σ²]`.
    fn joint_objective(&self, theta: &[f64], theta_u: &[f64]) -> Result<Objective> {
        let (&[beta], &[sigma2]) = (theta, theta_u) else {
            return Err(Error::InvalidParameter(format!(
                "binary glmm takes θ = [β] and θ_u = [σ²], got {theta:?} and {theta_u:?}"
            )));
        };
        Ok(Self::new(self.responses.clone(), beta, sigma2)?.objective())
    }
}

pub fn glmm_joint_neg_log(m: &BinaryGlmm, u: &[f64]) -> Result<f64> {
    m.validate()?;
    if u.len() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            got: u.len(),
        });
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite random effects {u:?}")));
    }
    Ok(m.neg_log_joint(u))
}
