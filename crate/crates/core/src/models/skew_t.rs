//! Multivariate t / skew-t density with a skewed first margin.
//!
//! The first coordinate follows a univariate skew-t with shape parameters
//! `a`, `c`; the remaining coordinates follow the
//! conditional of a spherical multivariate t with `ν` degrees of freedom.
//! The density integrates to one, so the log of its normalizing constant
//! is exactly zero. With `a = c = ν/2` it is the ordinary multivariate t.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTParams {
    pub dim: usize,
    pub a: f64,
    pub c: f64,
    pub nu: f64,
}

impl SkewTParams {
    pub fn new(dim: usize, a: f64, c: f64, nu: f64) -> Result<Self> {
        let p = Self { dim, a, c, nu };
        p.validate()?;
        Ok(p)
    }

    /// The ordinary multivariate Student t with `ν` degrees of freedom.
    pub fn student(dim: usize, nu: f64) -> Result<Self> {
        Self::new(dim, 0.5 * nu, 0.5 * nu, nu)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if self.dim == 0 || !ok(self.a) || !ok(self.c) || !ok(self.nu) {
            return Err(Error::InvalidParameter(format!(
                "skew-t needs dim >= 1 and positive a, c, nu; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Log of the density's normalizing factor.
    pub fn log_constant(&self) -> f64 {
        let (a, c, nu, d) = (self.a, self.c, self.nu, self.dim as f64);
        let ln_beta = ln_gamma(a) + ln_gamma(c) - ln_gamma(a + c);
        ln_gamma(0.5 * (nu + d))
            - ln_gamma(0.5 * (nu + 1.0))
            - ln_beta
            - 0.5 * (a + c).ln()
            - (a + c - 1.0) * std::f64::consts::LN_2
            - 0.5 * (d - 1.0) * (nu * std::f64::consts::PI).ln()
    }

    /// `s = sqrt(a + c + y²)` together with `s + y` and `s - y`, computed
    /// without cancellation.
    fn skew_parts(&self, y1: f64) -> (f64, f64, f64) {
        let ac = self.a + self.c;
        let s = (ac + y1 * y1).sqrt();
        if y1 >= 0.0 {
            let p = s + y1;
            (s, p, ac / p)
        } else {
            let m = s - y1;
            (s, ac / m, m)
        }
    }

    /// `-log p(y; ν, a, c)`.
    pub fn neg_log_density(&self, y: &[f64]) -> f64 {
        let (a, c, nu) = (self.a, self.c, self.nu);
        let d = self.dim as f64;
        let y1 = y[0];
        let ss: f64 = y.iter().map(|v| v * v).sum();
        let (s, p, m) = self.skew_parts(y1);
        let ln_s = s.ln();
        -self.log_constant() - 0.5 * (nu + 1.0) * (y1 * y1 / nu).ln_1p()
            - (a + 0.5) * (p.ln() - ln_s)
            - (c + 0.5) * (m.ln() - ln_s)
            + 0.5 * (nu + d) * (ss / nu).ln_1p()
    }

    pub fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let (a, c, nu) = (self.a, self.c, self.nu);
        let d = self.dim as f64;
        let y1 = y[0];
        let ss: f64 = y.iter().map(|v| v * v).sum();
        let (s, p, m) = self.skew_parts(y1);
        let s2 = s * s;
        let radial = (nu + d) / (nu + ss);
        let mut g = DVector::from_iterator(y.len(), y.iter().map(|v| radial * v));
        g[0] += -(nu + 1.0) * y1 / (nu + y1 * y1) - (a + 0.5) * m / s2 + (c + 0.5) * p / s2;
        g
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let (a, c, nu) = (self.a, self.c, self.nu);
        let n = y.len();
        let d = self.dim as f64;
        let y1 = y[0];
        let ss: f64 = y.iter().map(|v| v * v).sum();
        let (s, p, m) = self.skew_parts(y1);
        let s4 = s.powi(4);
        let inv = 1.0 / (nu + ss);
        let mut h = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { inv } else { 0.0 };
            (nu + d) * (diag - 2.0 * y[i] * y[j] * inv * inv)
        });
        let q = nu + y1 * y1;
        h[(0, 0)] += -(nu + 1.0) * (nu - y1 * y1) / (q * q)
            + (a + 0.5) * m * (s + 2.0 * y1) / s4
            + (c + 0.5) * p * (s - 2.0 * y1) / s4;
        h
    }

    pub fn objective(&self) -> Objective {
        let (p1, p2, p3) = (*self, *self, *self);
        let n = self.dim;
        Objective::new(n, move |y| p1.neg_log_density(y))
            .with_gradient(move |y| p2.gradient(y))
            .with_hessian(move |y| p3.hessian(y))
            .with_gradient_dependencies(vec![(0..n).collect(); n])
    }
}

/// `-log p(y)` for the skew-t with parameters `p`.
pub fn skew_t_neg_log_density(p: &SkewTParams, y: &[f64]) -> Result<f64> {
    p.validate()?;
    if y.len() != p.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            got: y.len(),
        });
    }
    Ok(p.neg_log_density(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Standard multivariate t log density at its center, written out
    /// independently of the skew-t normalizer.
    fn mvt_log_density_at_zero(d: usize, nu: f64) -> f64 {
        ln_gamma(0.5 * (nu + d as f64)) - ln_gamma(0.5 * nu) - 0.5 * d as f64 * (nu * PI).ln()
    }

    #[test]
    fn reduces_to_multivariate_t_at_center() {
        for (d, nu) in [(1, 3.0), (2, 5.0), (5, 3.0), (10, 20.0), (50, 3.0)] {
            let p = SkewTParams::student(d, nu).unwrap();
            let v = skew_t_neg_log_density(&p, &vec![0.0; d]).unwrap();
            assert!(
                (v + mvt_log_density_at_zero(d, nu)).abs() < 1e-10,
                "d={d} nu={nu}: {v}"
            );
        }
    }

    #[test]
    fn univariate_t3_at_zero() {
        let p = SkewTParams::new(1, 1.5, 1.5, 3.0).unwrap();
        let expected = -(ln_gamma(2.0) - ln_gamma(1.5) - 0.5 * (3.0 * PI).ln());
        assert!((p.neg_log_density(&[0.0]) - expected).abs() < 1e-13);
    }

    #[test]
    fn student_matches_t_density_away_from_center() {
        let (d, nu) = (3, 5.0);
        let p = SkewTParams::student(d, nu).unwrap();
        let y = [0.7, -1.2, 2.0];
        let ss: f64 = y.iter().map(|v| v * v).sum();
        let expected =
            mvt_log_density_at_zero(d, nu) - 0.5 * (nu + d as f64) * (1.0 + ss / nu).ln();
        assert!((p.neg_log_density(&y) + expected).abs() < 1e-12);
    }

    #[test]
    fn trailing_coordinates_are_sign_symmetric() {
        let p = SkewTParams::student(4, 5.0).unwrap();
        let y = [0.3, -0.8, 1.7, 0.25];
        let base = p.neg_log_density(&y);
        for i in 1..4 {
            let mut z = y;
            z[i] = -z[i];
            assert_eq!(p.neg_log_density(&z), base);
        }
    }

    #[test]
    fn stable_far_in_the_tails() {
        let p = SkewTParams::new(2, 12.0, 0.5, 3.0).unwrap();
        for y1 in [-1e8, -1e4, 1e4, 1e8] {
            let v = p.neg_log_density(&[y1, 0.0]);
            assert!(v.is_finite(), "{y1}: {v}");
            assert!(p.gradient(&[y1, 0.0]).iter().all(|g| g.is_finite()));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SkewTParams::new(2, 0.0, 1.0, 3.0).is_err());
        assert!(SkewTParams::new(0, 1.0, 1.0, 3.0).is_err());
        let p = SkewTParams::new(2, 1.0, 1.0, 3.0).unwrap();
        assert!(skew_t_neg_log_density(&p, &[0.0]).is_err());
    }
}
