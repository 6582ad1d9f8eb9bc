//! The integrand exponent `h(x)` together with its derivatives.
//!
//! An [`Objective`] wraps a pure function of a `d`-vector. Gradients and
//! Hessians may be supplied analytically; when they are not, central finite
//! differences are substituted. Every evaluation is charged against a shared
//! [`EvaluationBudget`] so that runaway optimization or quadrature loops fail
//! loudly instead of spinning.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
pub type HessFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Default number of evaluations allowed per top-level computation.
pub const DEFAULT_MAX_EVALS: u64 = 10_000_000;

/// Atomic evaluation counter with a hard ceiling.
#[derive(Debug)]
pub struct EvaluationBudget {
    max_evals: u64,
    count: AtomicU64,
}

impl EvaluationBudget {
    pub fn new(max_evals: u64) -> Self {
        Self {
            max_evals: max_evals.max(1),
            count: AtomicU64::new(0),
        }
    }

    pub fn max_evals(&self) -> u64 {
        self.max_evals
    }

    pub fn eval_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed).min(self.max_evals)
    }

    /// Reserves `n` evaluations, failing if that would overrun the ceiling.
    pub fn charge(&self, n: u64) -> Result<()> {
        let prev = self.count.fetch_add(n, Ordering::Relaxed);
        if prev + n > self.max_evals {
            return Err(Error::BudgetExceeded {
                max_evals: self.max_evals,
            });
        }
        Ok(())
    }
}

/// A smooth function `h: R^d -> R` whose `exp(-h)` is to be integrated.
#[derive(Clone)]
pub struct Objective {
    dim: usize,
    value_fn: Arc<ValueFn>,
    grad_fn: Option<Arc<GradFn>>,
    hess_fn: Option<Arc<HessFn>>,
    grad_deps: Option<Arc<Vec<Vec<usize>>>>,
    budget: Arc<EvaluationBudget>,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.grad_fn.is_some())
            .field("analytic_hessian", &self.hess_fn.is_some())
            .field("eval_count", &self.budget.eval_count())
            .finish()
    }
}

impl Objective {
    /// # Panics
    /// Panics if `dim == 0`.
    pub fn new<F>(dim: usize, value_fn: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        assert!(dim > 0, "objective dimension must be positive");
        Self {
            dim,
            value_fn: Arc::new(value_fn),
            grad_fn: None,
            hess_fn: None,
            grad_deps: None,
            budget: Arc::new(EvaluationBudget::new(DEFAULT_MAX_EVALS)),
        }
    }

    pub fn with_gradient<G>(mut self, grad_fn: G) -> Self
    where
        G: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        self.grad_fn = Some(Arc::new(grad_fn));
        self
    }

    pub fn with_hessian<H>(mut self, hess_fn: H) -> Self
    where
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hess_fn = Some(Arc::new(hess_fn));
        self
    }

    /// Declares, for each gradient component `i`, the coordinates that
    /// `dh/dx_i` depends on. Used by the automatic coordinate ordering.
    pub fn with_gradient_dependencies(mut self, deps: Vec<Vec<usize>>) -> Self {
        assert_eq!(deps.len(), self.dim, "one dependency set per coordinate");
        self.grad_deps = Some(Arc::new(deps));
        self
    }

    /// Same function, fresh budget of `max_evals` evaluations.
    pub fn with_budget(mut self, max_evals: u64) -> Self {
        self.budget = Arc::new(EvaluationBudget::new(max_evals));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad_fn.is_some()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hess_fn.is_some()
    }

    pub fn gradient_dependencies(&self) -> Option<&[Vec<usize>]> {
        self.grad_deps.as_deref().map(|v| v.as_slice())
    }

    pub fn budget(&self) -> &EvaluationBudget {
        &self.budget
    }

    pub fn eval_count(&self) -> u64 {
        self.budget.eval_count()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite evaluation point {x:?}"
            )));
        }
        Ok(())
    }

    fn raw_value(&self, x: &[f64]) -> Result<f64> {
        self.budget.charge(1)?;
        let v = (self.value_fn)(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { x: x.to_vec() });
        }
        Ok(v)
    }

    /// `h(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        self.raw_value(x)
    }

    /// `grad h(x)`, analytic when available.
    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_input(x)?;
        match &self.grad_fn {
            Some(g) => {
                self.budget.charge(1)?;
                let grad = g(x);
                if grad.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: grad.len(),
                    });
                }
                if grad.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteObjective { x: x.to_vec() });
                }
                Ok(grad)
            }
            None => self.fd_gradient_unchecked(x),
        }
    }

    /// Hessian of `h` at `x`, exactly symmetric.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let mut m = match &self.hess_fn {
            Some(h) => {
                self.budget.charge(1)?;
                let m = h(x);
                if m.nrows() != self.dim || m.ncols() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: m.nrows(),
                    });
                }
                m
            }
            None if self.grad_fn.is_some() => self.fd_hessian_from_gradient(x)?,
            None => self.fd_hessian_from_values(x)?,
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteObjective { x: x.to_vec() });
        }
        symmetrize(&mut m);
        Ok(m)
    }

    /// Central-difference gradient, regardless of any analytic gradient.
    pub fn fd_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_input(x)?;
        self.fd_gradient_unchecked(x)
    }

    /// Finite-difference Hessian, regardless of any analytic Hessian.
    pub fn fd_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let mut m = if self.grad_fn.is_some() {
            self.fd_hessian_from_gradient(x)?
        } else {
            self.fd_hessian_from_values(x)?
        };
        symmetrize(&mut m);
        Ok(m)
    }

    fn fd_gradient_unchecked(&self, x: &[f64]) -> Result<DVector<f64>> {
        let step0 = f64::EPSILON.cbrt();
        let mut xs = x.to_vec();
        let mut grad = DVector::zeros(self.dim);
        for i in 0..self.dim {
            let step = step0 * (1.0 + x[i].abs());
            xs[i] = x[i] + step;
            let up = self.raw_value(&xs)?;
            xs[i] = x[i] - step;
            let down = self.raw_value(&xs)?;
            xs[i] = x[i];
            grad[i] = (up - down) / (2.0 * step);
        }
        Ok(grad)
    }

    fn fd_hessian_from_gradient(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let step0 = f64::EPSILON.sqrt();
        let mut xs = x.to_vec();
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let step = step0 * (1.0 + x[j].abs());
            xs[j] = x[j] + step;
            let up = self.gradient(&xs)?;
            xs[j] = x[j] - step;
            let down = self.gradient(&xs)?;
            xs[j] = x[j];
            for i in 0..self.dim {
                m[(i, j)] = (up[i] - down[i]) / (2.0 * step);
            }
        }
        Ok(m)
    }

    fn fd_hessian_from_values(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let step0 = f64::EPSILON.powf(0.25);
        let n = self.dim;
        let steps: Vec<f64> = x.iter().map(|v| step0 * (1.0 + v.abs())).collect();
        let f0 = self.raw_value(x)?;
        let mut xs = x.to_vec();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let hi = steps[i];
            xs[i] = x[i] + hi;
            let up = self.raw_value(&xs)?;
            xs[i] = x[i] - hi;
            let down = self.raw_value(&xs)?;
            xs[i] = x[i];
            m[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
            for j in 0..i {
                let hj = steps[j];
                let mut corner = |si: f64, sj: f64| -> Result<f64> {
                    xs[i] = x[i] + si * hi;
                    xs[j] = x[j] + sj * hj;
                    let v = self.raw_value(&xs);
                    xs[i] = x[i];
                    xs[j] = x[j];
                    v
                };
                let pp = corner(1.0, 1.0)?;
                let pm = corner(1.0, -1.0)?;
                let mp = corner(-1.0, 1.0)?;
                let mm = corner(-1.0, -1.0)?;
                let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Re-expresses the objective in permuted coordinates: coordinate `k` of
    /// the returned objective is coordinate `perm[k]` of `self`. The budget is
    /// shared with `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Objective> {
        validate_permutation(perm, self.dim)?;
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let perm: Arc<Vec<usize>> = Arc::new(perm.to_vec());
        let unpermute = {
            let perm = Arc::clone(&perm);
            move |xp: &[f64]| -> Vec<f64> {
                let mut x = vec![0.0; xp.len()];
                for (k, &p) in perm.iter().enumerate() {
                    x[p] = xp[k];
                }
                x
            }
        };
        let unpermute = Arc::new(unpermute);

        let value_fn = {
            let f = Arc::clone(&self.value_fn);
            let u = Arc::clone(&unpermute);
            move |xp: &[f64]| f(&u(xp))
        };
        let grad_fn = self.grad_fn.as_ref().map(|g| {
            let g = Arc::clone(g);
            let u = Arc::clone(&unpermute);
            let perm = Arc::clone(&perm);
            Arc::new(move |xp: &[f64]| {
                let full = g(&u(xp));
                DVector::from_iterator(perm.len(), perm.iter().map(|&p| full[p]))
            }) as Arc<GradFn>
        });
        let hess_fn = self.hess_fn.as_ref().map(|h| {
            let h = Arc::clone(h);
            let u = Arc::clone(&unpermute);
            let perm = Arc::clone(&perm);
            Arc::new(move |xp: &[f64]| {
                let full = h(&u(xp));
                let n = perm.len();
                DMatrix::from_fn(n, n, |i, j| full[(perm[i], perm[j])])
            }) as Arc<HessFn>
        });
        let grad_deps = self.grad_deps.as_ref().map(|deps| {
            let mut inverse = vec![0; perm.len()];
            for (k, &p) in perm.iter().enumerate() {
                inverse[p] = k;
            }
            Arc::new(
                perm.iter()
                    .map(|&p| deps[p].iter().map(|&j| inverse[j]).collect())
                    .collect(),
            )
        });

        Ok(Objective {
            dim: self.dim,
            value_fn: Arc::new(value_fn),
            grad_fn,
            hess_fn,
            grad_deps,
            budget: Arc::clone(&self.budget),
        })
    }
}

/// In-place `(M + M^T) / 2`, writing the same value into both triangles.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn validate_permutation(perm: &[usize], dim: usize) -> Result<()> {
    if perm.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "permutation has length {} but dimension is {dim}",
            perm.len()
        )));
    }
    let mut seen = vec![false; dim];
    for &p in perm {
        if p >= dim || seen[p] {
            return Err(Error::InvalidParameter(format!(
                "{perm:?} is not a permutation of 0..{dim}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(dim: usize) -> Objective {
        Objective::new(dim, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>())
            .with_gradient(|x| DVector::from_column_slice(x))
            .with_hessian(move |x| DMatrix::identity(x.len(), x.len()))
    }

    fn quadratic() -> Objective {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let a2 = a.clone();
        Objective::new(2, move |x| {
            let v = DVector::from_column_slice(x);
            0.5 * v.dot(&(&a * &v))
        })
        .with_hessian(move |_| a2.clone())
    }

    #[test]
    fn gaussian_values() {
        let obj = gaussian(2);
        assert_eq!(obj.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(obj.evaluate(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(obj.eval_count(), 2);
    }

    #[test]
    fn gaussian_gradient_and_hessian() {
        let obj = gaussian(2);
        assert_eq!(obj.gradient(&[1.0, 2.0]).unwrap().as_slice(), &[1.0, 2.0]);
        assert_eq!(obj.gradient(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(obj.hessian(&[0.3, -7.0]).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn quadratic_hessian_analytic_and_fd() {
        let obj = quadratic();
        let h = obj.hessian(&[0.4, 1.0]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        // no gradient supplied: value-based second differences
        let fd = obj.fd_hessian(&[0.4, 1.0]).unwrap();
        for (a, b) in fd.iter().zip(h.iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        // fd gradient of the quadratic is A x
        let g = obj.gradient(&[1.0, 0.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hessian_is_exactly_symmetric() {
        let obj = Objective::new(3, |x| (x[0] * x[1]).sin() + x[2].powi(3) * x[0] + x[1].exp());
        let h = obj.hessian(&[0.3, -0.7, 1.1]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[(i, j)].to_bits(), h[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn referentially_transparent() {
        let obj = Objective::new(2, |x| (x[0] * 1.3).sin() * x[1].cosh());
        let x = [0.123, -4.56];
        assert_eq!(
            obj.evaluate(&x).unwrap().to_bits(),
            obj.evaluate(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn non_finite_value_is_reported_with_point() {
        let obj = Objective::new(1, |x| x[0].ln());
        match obj.evaluate(&[-1.0]) {
            Err(Error::NonFiniteObjective { x }) => assert_eq!(x, vec![-1.0]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            obj.gradient(&[0.0]),
            Err(Error::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let obj = gaussian(3);
        assert!(matches!(
            obj.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let obj = gaussian(2).with_budget(3);
        for _ in 0..3 {
            obj.evaluate(&[0.0, 0.0]).unwrap();
        }
        assert!(matches!(
            obj.evaluate(&[0.0, 0.0]),
            Err(Error::BudgetExceeded { max_evals: 3 })
        ));
        assert_eq!(obj.eval_count(), 3);
    }

    #[test]
    fn permuted_objective_reorders_derivatives() {
        let obj = Objective::new(3, |x| x[0] + 2.0 * x[1] * x[1] + 3.0 * x[2] * x[0])
            .with_gradient(|x| DVector::from_vec(vec![1.0 + 3.0 * x[2], 4.0 * x[1], 3.0 * x[0]]))
            .with_hessian(|_| {
                DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 3.0, 0.0, 4.0, 0.0, 3.0, 0.0, 0.0])
            });
        let perm = [2, 0, 1];
        let p = obj.permuted(&perm).unwrap();
        let xp = [0.5, -1.0, 2.0]; // original x = (-1, 2, 0.5)
        assert_eq!(
            p.evaluate(&xp).unwrap(),
            obj.evaluate(&[-1.0, 2.0, 0.5]).unwrap()
        );
        let g = obj.gradient(&[-1.0, 2.0, 0.5]).unwrap();
        let gp = p.gradient(&xp).unwrap();
        for k in 0..3 {
            assert_eq!(gp[k], g[perm[k]]);
        }
        let hp = p.hessian(&xp).unwrap();
        assert_eq!(hp[(0, 1)], 3.0);
        assert_eq!(hp[(2, 2)], 4.0);
        assert!(obj.permuted(&[0, 0, 1]).is_err());
    }
}
