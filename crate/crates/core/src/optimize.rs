//! Mode finding and conditional minimization.
//!
//! Both the global and the conditional problems are solved by a damped
//! Newton iteration with Armijo backtracking, falling back to steepest
//! descent whenever the current Hessian fails to factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky, inf_norm, trailing_block};
use crate::objective::Objective;

pub const DEFAULT_GRAD_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Newton decrement, relative to `1 + |h|`, below which a step cannot
/// change `h` measurably.
const ROUNDOFF_DECREMENT: f64 = 1e-13;

/// The global minimizer of `h` and the curvature there.
#[derive(Debug, Clone)]
pub struct ModeInfo {
    pub x_hat: DVector<f64>,
    pub h_hat: f64,
    pub v_hat: DMatrix<f64>,
    /// Lower-triangular Cholesky factor of `v_hat`.
    pub chol_v_hat: DMatrix<f64>,
    pub logdet_v_hat: f64,
    pub iterations: usize,
}

impl ModeInfo {
    /// Builds the mode record at a point already known to be the minimizer.
    pub fn at_point(obj: &Objective, x: &[f64]) -> Result<Self> {
        let h_hat = obj.evaluate(x)?;
        let v_hat = obj.hessian(x)?;
        Self::from_parts(DVector::from_column_slice(x), h_hat, v_hat, 0)
    }

    fn from_parts(
        x_hat: DVector<f64>,
        h_hat: f64,
        v_hat: DMatrix<f64>,
        iterations: usize,
    ) -> Result<Self> {
        let chol = cholesky(&v_hat).ok_or_else(|| Error::HessianNotPd {
            x: x_hat.as_slice().to_vec(),
        })?;
        Ok(Self {
            logdet_v_hat: chol_logdet(&chol),
            chol_v_hat: chol.l(),
            x_hat,
            h_hat,
            v_hat,
            iterations,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    /// The same mode in permuted coordinates (coordinate `k` is original
    /// coordinate `perm[k]`). The Cholesky factor is recomputed.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        crate::objective::validate_permutation(perm, n)?;
        let x_hat = DVector::from_iterator(n, perm.iter().map(|&p| self.x_hat[p]));
        let v_hat = DMatrix::from_fn(n, n, |i, j| self.v_hat[(perm[i], perm[j])]);
        Self::from_parts(x_hat, self.h_hat, v_hat, self.iterations)
    }
}

/// Outcome of a Newton run on some (sub-)problem.
struct NewtonOutcome {
    x: DVector<f64>,
    value: f64,
    hessian: DMatrix<f64>,
    iterations: usize,
}

/// Damped Newton with Armijo backtracking on an abstract smooth problem.
fn newton<V, G, H>(
    value: V,
    gradient: G,
    hessian: H,
    x0: DVector<f64>,
    grad_tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome>
where
    V: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    H: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = x0;
    let mut f = value(&x)?;
    let mut grad_norm = f64::INFINITY;

    for iter in 0..=max_iter {
        let g = gradient(&x)?;
        grad_norm = inf_norm(&g);
        let hess = hessian(&x)?;
        if grad_norm <= grad_tol * (1.0 + f.abs()) {
            return Ok(NewtonOutcome {
                x,
                value: f,
                hessian: hess,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }

        let newton_dir = cholesky(&hess)
            .map(|c| -c.solve(&g))
            .filter(|d| d.iter().all(|v| v.is_finite()) && d.dot(&g) < 0.0);
        let is_newton = newton_dir.is_some();
        let dir = newton_dir.unwrap_or_else(|| modified_newton_direction(&hess, &g));

        let slope = g.dot(&dir);
        if is_newton && -slope <= ROUNDOFF_DECREMENT * (1.0 + f.abs()) {
            let xn = &x + &dir;
            match (value(&xn), gradient(&xn)) {
                (Ok(v), Ok(gn)) if inf_norm(&gn) < 0.5 * grad_norm => {
                    x = xn;
                    f = v;
                    continue;
                }
                _ => {
                    return Ok(NewtonOutcome {
                        x,
                        value: f,
                        hessian: hess,
                        iterations: iter,
                    })
                }
            }
        }
        match line_search(&value, &x, f, &dir, slope) {
            Some((xn, fn_)) => {
                x = xn;
                f = fn_;
            }
            None if is_newton => {
                // The predicted decrease is lost in the rounding of h; keep
                // the Newton step if it clearly shrinks the gradient.
                let xn = &x + &dir;
                match (value(&xn), gradient(&xn)) {
                    (Ok(v), Ok(gn)) if inf_norm(&gn) < 0.5 * grad_norm => {
                        x = xn;
                        f = v;
                    }
                    _ => break,
                }
            }
            None => break,
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        grad_norm,
    })
}

/// Newton direction with the Hessian's eigenvalues replaced by their
/// absolute values (floored), for points where the Hessian is indefinite.
fn modified_newton_direction(hess: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let eig = hess.clone().symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-8 * largest.max(1.0);
    let q = &eig.eigenvectors;
    let coeffs = q.transpose() * g;
    let scaled = DVector::from_iterator(
        g.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c / l.abs().max(floor)),
    );
    let dir = -(q * scaled);
    if dir.iter().all(|v| v.is_finite()) && dir.dot(g) < 0.0 {
        dir
    } else {
        -g / inf_norm(g).max(1.0)
    }
}

fn line_search<V>(
    value: &V,
    x: &DVector<f64>,
    f: f64,
    dir: &DVector<f64>,
    slope: f64,
) -> Option<(DVector<f64>, f64)>
where
    V: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut step = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let xn = x + dir * step;
        match value(&xn) {
            Ok(fn_) if fn_ <= f + ARMIJO_SLOPE * step * slope => return Some((xn, fn_)),
            // Budget exhaustion must not be hidden behind more backtracking.
            Err(Error::BudgetExceeded { .. }) => return None,
            _ => step *= BACKTRACK,
        }
    }
    None
}

/// Global minimization of `h` starting from `x0`.
///
/// Converges when `|grad h|_inf <= grad_tol * (1 + |h|)`, or when the Newton
/// decrement has reached the rounding level of `h` and a full Newton step no
/// longer halves the gradient. Then requires
/// the Hessian at the returned point to be positive definite.
pub fn minimize(obj: &Objective, x0: &[f64], grad_tol: f64, max_iter: usize) -> Result<ModeInfo> {
    if grad_tol <= 0.0 {
        return Err(Error::InvalidParameter("grad_tol must be positive".into()));
    }
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    let out = newton(
        |x| obj.evaluate(x.as_slice()),
        |x| obj.gradient(x.as_slice()),
        |x| obj.hessian(x.as_slice()),
        DVector::from_column_slice(x0),
        grad_tol,
        max_iter,
    )?;
    ModeInfo::from_parts(out.x, out.value, out.hessian, out.iterations)
}

/// Result of minimizing over the trailing block with the leading block fixed.
#[derive(Debug, Clone)]
pub struct ConditionalMinimum {
    /// Minimizer over the free (trailing) coordinates.
    pub z: DVector<f64>,
    /// `h` at the full point `(fixed, z)`.
    pub value: f64,
    /// Hessian of `h` restricted to the free block, at `(fixed, z)`.
    pub free_hessian: DMatrix<f64>,
}

fn join(fixed: &[f64], z: &DVector<f64>) -> Vec<f64> {
    let mut x = Vec::with_capacity(fixed.len() + z.len());
    x.extend_from_slice(fixed);
    x.extend_from_slice(z.as_slice());
    x
}

fn check_block(obj: &Objective, q: usize, fixed: &[f64], free_len: usize) -> Result<()> {
    let d = obj.dim();
    if q == 0 || q >= d {
        return Err(Error::InvalidParameter(format!(
            "fixed block size {q} must satisfy 1 <= q < {d}"
        )));
    }
    if fixed.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: fixed.len(),
        });
    }
    if free_len != d - q {
        return Err(Error::DimensionMismatch {
            expected: d - q,
            got: free_len,
        });
    }
    Ok(())
}

/// Minimizes `z -> h(fixed, z)` from `init`, returning the minimizer together
/// with the value and free-block Hessian there.
pub fn conditional_minimum(
    obj: &Objective,
    fixed: &[f64],
    init: &DVector<f64>,
    grad_tol: f64,
    max_iter: usize,
) -> Result<ConditionalMinimum> {
    let q = fixed.len();
    check_block(obj, q, fixed, init.len())?;
    let out = newton(
        |z| obj.evaluate(&join(fixed, z)),
        |z| Ok(obj.gradient(&join(fixed, z))?.rows(q, z.len()).into_owned()),
        |z| Ok(trailing_block(&obj.hessian(&join(fixed, z))?, q)),
        init.clone(),
        grad_tol,
        max_iter,
    )?;
    if cholesky(&out.hessian).is_none() {
        return Err(Error::HessianNotPd {
            x: join(fixed, &out.x),
        });
    }
    Ok(ConditionalMinimum {
        z: out.x,
        value: out.value,
        free_hessian: out.hessian,
    })
}

/// The conditional minimizer of `h` over coordinates `q..d` with the first
/// `q` coordinates fixed at `fixed_vals`.
pub fn conditional_minimize(
    obj: &Objective,
    q: usize,
    fixed_vals: &[f64],
    init: &[f64],
    grad_tol: f64,
) -> Result<DVector<f64>> {
    check_block(obj, q, fixed_vals, init.len())?;
    conditional_minimum(
        obj,
        fixed_vals,
        &DVector::from_column_slice(init),
        grad_tol,
        DEFAULT_MAX_ITER,
    )
    .map(|c| c.z)
}

/// Linearized conditional minimum around the mode:
/// `z~ = z^ + V_zz^{-1} V_zy (y^ - y)` with `y` the first `q` coordinates.
pub fn approx_conditional_minimum(
    mode: &ModeInfo,
    q: usize,
    fixed_vals: &[f64],
) -> Result<DVector<f64>> {
    let d = mode.dim();
    if q == 0 || q >= d || fixed_vals.len() != q {
        return Err(Error::InvalidParameter(format!(
            "fixed block of size {} (q = {q}) invalid for dimension {d}",
            fixed_vals.len()
        )));
    }
    let v_zz = trailing_block(&mode.v_hat, q);
    let chol = cholesky(&v_zz).ok_or_else(|| Error::HessianNotPd {
        x: mode.x_hat.as_slice().to_vec(),
    })?;
    Ok(linearized_minimum(mode, q, fixed_vals, &chol))
}

/// Same as [`approx_conditional_minimum`] with a precomputed factor of `V_zz`.
pub(crate) fn linearized_minimum(
    mode: &ModeInfo,
    q: usize,
    fixed_vals: &[f64],
    chol_zz: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
) -> DVector<f64> {
    let d = mode.dim();
    let v_zy = mode.v_hat.view((q, 0), (d - q, q));
    let shift = DVector::from_iterator(q, (0..q).map(|i| mode.x_hat[i] - fixed_vals[i]));
    let rhs = v_zy * shift;
    let mut z = chol_zz.solve(&rhs);
    for (i, zi) in z.iter_mut().enumerate() {
        *zi += mode.x_hat[q + i];
    }
    z
}
