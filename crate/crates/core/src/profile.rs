//! Standard Laplace approximation and the sequential Laplace profiles.
//!
//! For coordinate `k` (0-based, in the active ordering) the un-normalized
//! log profile is
//!
//! ```text
//! g_k(t) = h(x^) - h(x^_{<k}, t, z(t))
//!          + ½ [log|V_{k:}(x^)| - log 2π - log|V_{k+1:}(x^_{<k}, t, z(t))|]
//! ```
//!
//! where `z(t)` minimizes `h` over coordinates `k+1..d` (exactly, or by the
//! linearization around the mode) and `V_{k:}` denotes the trailing block of
//! the Hessian starting at row/column `k`. The leading coordinates are held
//! at their modal values. For `k = 0` this is the marginal profile, for
//! `k = d-1` the trailing block is empty and no minimization is needed.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky, logdet_pd, trailing_block, LN_2PI};
use crate::objective::Objective;
use crate::optimize::{
    conditional_minimum, linearized_minimum, ConditionalMinimum, ModeInfo, DEFAULT_MAX_ITER,
};

/// How the trailing coordinates are profiled out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Exact conditional minimization by Newton's method.
    Exact,
    /// First-order linearization of the conditional minimum around the mode.
    Approximate,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Strategy::Exact),
            "approx" | "approximate" => Ok(Strategy::Approximate),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy `{other}` (expected exact|approx)"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Exact => "exact",
            Strategy::Approximate => "approx",
        })
    }
}

/// The standard Laplace approximation, in log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceResult {
    pub log_i: f64,
    pub logdet_v_hat: f64,
    pub dim: usize,
}

/// `(d/2) log 2π - ½ log|V^| - h(x^)`.
pub fn log_laplace(mode: &ModeInfo) -> LaplaceResult {
    let d = mode.dim();
    LaplaceResult {
        log_i: 0.5 * d as f64 * LN_2PI - 0.5 * mode.logdet_v_hat - mode.h_hat,
        logdet_v_hat: mode.logdet_v_hat,
        dim: d,
    }
}

/// Everything needed to evaluate the profiles under one coordinate ordering.
///
/// Holds the objective and mode re-expressed in permuted coordinates plus
/// per-coordinate caches computed once at the mode.
#[derive(Debug, Clone)]
pub struct ProfileContext {
    obj: Objective,
    mode: ModeInfo,
    permutation: Vec<usize>,
    strategy: Strategy,
    grad_tol: f64,
    /// `log|V_{k:}(x^)|` for `k = 0..=d` (the last entry is 0).
    trailing_logdet: Vec<f64>,
    /// Cholesky factors of `V_{k+1:}(x^)` for `k = 0..d-1`, for the
    /// linearized minimum.
    trailing_chol: Vec<Cholesky<f64, Dyn>>,
    /// `sqrt([V_{k:}(x^)^{-1}]_{00})`: the Gaussian spread of profile `k`.
    scales: Vec<f64>,
}

impl ProfileContext {
    /// `mode` is given in the original coordinates of `obj`; coordinate `k`
    /// of the context is original coordinate `permutation[k]`.
    pub fn new(
        obj: &Objective,
        mode: &ModeInfo,
        permutation: &[usize],
        strategy: Strategy,
        grad_tol: f64,
    ) -> Result<Self> {
        let obj = obj.permuted(permutation)?;
        let mode = mode.permuted(permutation)?;
        let d = mode.dim();
        let not_pd = || Error::HessianNotPd {
            x: mode.x_hat.as_slice().to_vec(),
        };

        let mut trailing_logdet = Vec::with_capacity(d + 1);
        let mut trailing_chol = Vec::with_capacity(d.saturating_sub(1));
        let mut scales = Vec::with_capacity(d);
        for k in 0..d {
            let block = trailing_block(&mode.v_hat, k);
            let chol = cholesky(&block).ok_or_else(not_pd)?;
            trailing_logdet.push(chol_logdet(&chol));
            let mut e0 = DVector::zeros(d - k);
            e0[0] = 1.0;
            let var = chol.solve(&e0)[0];
            if !(var > 0.0) || !var.is_finite() {
                return Err(not_pd());
            }
            scales.push(var.sqrt());
            if k > 0 {
                trailing_chol.push(chol);
            }
        }
        trailing_logdet.push(0.0);

        Ok(Self {
            obj,
            mode,
            permutation: permutation.to_vec(),
            strategy,
            grad_tol,
            trailing_logdet,
            trailing_chol,
            scales,
        })
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// The mode in the context's (permuted) coordinates.
    pub fn mode(&self) -> &ModeInfo {
        &self.mode
    }

    /// `log|V_{k:}(x^)|`, cached.
    pub fn trailing_logdet(&self, k: usize) -> f64 {
        self.trailing_logdet[k]
    }

    /// Gaussian spread of profile `k` at the mode.
    pub fn scale(&self, k: usize) -> f64 {
        self.scales[k]
    }

    /// Profile `k` at its modal value `x^_k`, from cached quantities only.
    pub fn log_profile_at_mode(&self, k: usize) -> f64 {
        0.5 * (self.trailing_logdet[k] - LN_2PI - self.trailing_logdet[k + 1])
    }

    fn unpermute(&self, xp: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; xp.len()];
        for (k, &p) in self.permutation.iter().enumerate() {
            x[p] = xp[k];
        }
        x
    }

    /// Un-normalized log profile of coordinate `k` at `t`, conditioning on
    /// the modal values of coordinates `0..k`.
    ///
    /// `warm` carries the previous conditional minimizer for this coordinate
    /// between calls; it is ignored by the approximate strategy.
    pub fn log_profile(&self, k: usize, t: f64, warm: &mut Option<DVector<f64>>) -> Result<f64> {
        let d = self.dim();
        if k >= d {
            return Err(Error::InvalidParameter(format!(
                "coordinate {k} out of range for dimension {d}"
            )));
        }
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "profile argument must be finite, got {t}"
            )));
        }
        let x_hat = self.mode.x_hat.as_slice();
        let mut fixed: Vec<f64> = x_hat[..k].to_vec();
        fixed.push(t);

        if k + 1 == d {
            let h = self.obj.evaluate(&fixed)?;
            return Ok(self.mode.h_hat - h + 0.5 * (self.trailing_logdet[k] - LN_2PI));
        }

        let (point, h, logdet) = match self.strategy {
            Strategy::Exact => {
                let cm = self
                    .exact_conditional(k, &fixed, warm.take())
                    .map_err(|e| self.with_original_point(e))?;
                let logdet = logdet_pd(&cm.free_hessian);
                let mut point = fixed;
                point.extend_from_slice(cm.z.as_slice());
                *warm = Some(cm.z);
                (point, cm.value, logdet)
            }
            Strategy::Approximate => {
                let z = linearized_minimum(&self.mode, k + 1, &fixed, &self.trailing_chol[k]);
                let mut point = fixed;
                point.extend_from_slice(z.as_slice());
                let h = self.obj.evaluate(&point)?;
                let hess = self.obj.hessian(&point)?;
                (point, h, logdet_pd(&trailing_block(&hess, k + 1)))
            }
        };
        let logdet = logdet.ok_or_else(|| Error::HessianNotPd {
            x: self.unpermute(&point),
        })?;
        Ok(self.mode.h_hat - h + 0.5 * (self.trailing_logdet[k] - LN_2PI - logdet))
    }

    /// Newton on the trailing block from the best of: the previous
    /// minimizer, the linearized minimum and the modal trailing values.
    /// Further starts are tried only if the best one fails.
    fn exact_conditional(
        &self,
        k: usize,
        fixed: &[f64],
        warm: Option<DVector<f64>>,
    ) -> Result<ConditionalMinimum> {
        let d = self.dim();
        let mut starts: Vec<DVector<f64>> = warm.into_iter().filter(|z| z.len() == d - k - 1).collect();
        starts.push(linearized_minimum(&self.mode, k + 1, fixed, &self.trailing_chol[k]));
        starts.push(self.mode.x_hat.rows(k + 1, d - k - 1).into_owned());

        let mut ranked: Vec<(f64, DVector<f64>)> = Vec::with_capacity(starts.len());
        for z in starts {
            let mut point = fixed.to_vec();
            point.extend_from_slice(z.as_slice());
            match self.obj.evaluate(&point) {
                Ok(h) => ranked.push((h, z)),
                Err(Error::BudgetExceeded { max_evals }) => {
                    return Err(Error::BudgetExceeded { max_evals })
                }
                Err(_) => {}
            }
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut last_err = Error::NonFiniteObjective { x: fixed.to_vec() };
        for (_, z) in ranked {
            match conditional_minimum(&self.obj, fixed, &z, self.grad_tol, DEFAULT_MAX_ITER) {
                Ok(cm) => return Ok(cm),
                Err(e @ Error::BudgetExceeded { .. }) => return Err(e),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    fn with_original_point(&self, e: Error) -> Error {
        match e {
            Error::HessianNotPd { x } => Error::HessianNotPd {
                x: self.unpermute(&x),
            },
            Error::NonFiniteObjective { x } => Error::NonFiniteObjective {
                x: self.unpermute(&x),
            },
            other => other,
        }
    }

    /// Log marginal profile of the first coordinate.
    pub fn log_profile_marginal(&self, x1: f64) -> Result<f64> {
        if self.dim() < 2 {
            return Err(Error::InvalidParameter(
                "marginal profile needs dimension >= 2".into(),
            ));
        }
        self.log_profile(0, x1, &mut None)
    }

    /// Log conditional profile of coordinate `q` (1-based, `2 <= q <= d-1`)
    /// given the modal values of coordinates `1..q-1`.
    pub fn log_profile_conditional(&self, q: usize, xq: f64) -> Result<f64> {
        let d = self.dim();
        if q < 2 || q + 1 > d {
            return Err(Error::InvalidParameter(format!(
                "conditional profile index {q} must satisfy 2 <= q <= {}",
                d.saturating_sub(1)
            )));
        }
        self.log_profile(q - 1, xq, &mut None)
    }

    /// Log conditional profile of the last coordinate given the modal values
    /// of all others.
    pub fn log_profile_last(&self, xd: f64) -> Result<f64> {
        if self.dim() < 2 {
            return Err(Error::InvalidParameter(
                "last-coordinate profile needs dimension >= 2".into(),
            ));
        }
        self.log_profile(self.dim() - 1, xd, &mut None)
    }
}

/// Coordinate ordering that puts first the coordinates whose gradient
/// component depends on the most coordinates. Identity when the objective
/// declares no dependency structure.
pub fn auto_permutation(obj: &Objective) -> Vec<usize> {
    let mut order: Vec<usize> = (0..obj.dim()).collect();
    if let Some(deps) = obj.gradient_dependencies() {
        order.sort_by_key(|&i| std::cmp::Reverse(deps[i].len()));
    }
    order
}
