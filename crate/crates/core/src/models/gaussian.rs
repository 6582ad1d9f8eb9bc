use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{logdet_pd, LN_2PI};
use crate::objective::Objective;

/// `h(x) = ½ xᵀx`; its integral is `(2π)^{d/2}`.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicGaussian {
    pub dim: usize,
}

impl IsotropicGaussian {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn log_integral(&self) -> f64 {
        0.5 * self.dim as f64 * LN_2PI
    }

    pub fn objective(&self) -> Objective {
        Objective::new(self.dim, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>())
            .with_gradient(|x| DVector::from_column_slice(x))
            .with_hessian(|x| DMatrix::identity(x.len(), x.len()))
            .with_gradient_dependencies((0..self.dim).map(|i| vec![i]).collect())
    }
}

/// `h(x) = ½ (x - m)ᵀ A (x - m)` for a symmetric positive definite `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
    center: DVector<f64>,
    logdet: f64,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::with_center(a, DVector::zeros(n))
    }

    pub fn with_center(a: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != center.len() || a.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "quadratic form needs a non-empty square matrix matching the center".into(),
            ));
        }
        let mut a = a;
        crate::objective::symmetrize(&mut a);
        let logdet = logdet_pd(&a).ok_or_else(|| {
            Error::InvalidParameter("quadratic form matrix is not positive definite".into())
        })?;
        Ok(Self { a, center, logdet })
    }

    /// `A = I + ρ·11ᵀ`, positive definite for `ρ > -1/d`. With `d = 2`,
    /// `ρ = 1` this is `[[2, 1], [1, 2]]`.
    pub fn equicorrelated(dim: usize, rho: f64) -> Result<Self> {
        let a = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 + rho } else { rho });
        Self::new(a)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `(d/2) log 2π - ½ log|A|`.
    pub fn log_integral(&self) -> f64 {
        0.5 * self.dim() as f64 * LN_2PI - 0.5 * self.logdet
    }

    pub fn objective(&self) -> Objective {
        let n = self.dim();
        let (a1, a2, a3) = (self.a.clone(), self.a.clone(), self.a.clone());
        let (c1, c2) = (self.center.clone(), self.center.clone());
        let deps = (0..n)
            .map(|i| (0..n).filter(|&j| self.a[(i, j)] != 0.0).collect())
            .collect();
        Objective::new(n, move |x| {
            let r = DVector::from_column_slice(x) - &c1;
            0.5 * r.dot(&(&a1 * &r))
        })
        .with_gradient(move |x| &a2 * (DVector::from_column_slice(x) - &c2))
        .with_hessian(move |_| a3.clone())
        .with_gradient_dependencies(deps)
    }
}

/// Random symmetric positive definite matrix with condition number `cond`:
/// `Q diag(λ) Qᵀ` with log-uniformly spread eigenvalues in `[1, cond]` and a
/// random orthogonal `Q`.
pub fn random_spd(dim: usize, cond: f64, seed: u64) -> DMatrix<f64> {
    assert!(dim > 0 && cond >= 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let q = g.qr().q();
    let eig = DVector::from_fn(dim, |i, _| {
        if dim == 1 {
            1.0
        } else {
            cond.powf(i as f64 / (dim - 1) as f64)
        }
    });
    let mut m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    crate::objective::symmetrize(&mut m);
    m
}
