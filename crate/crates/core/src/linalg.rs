//! Small dense helpers around Cholesky factorizations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub const LN_2PI: f64 = 1.837_877_066_409_345_483_560_659_472_811;

/// Cholesky factor of a symmetric matrix, or `None` when it is not
/// numerically positive definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| !(l[(i, i)] > 0.0) || !l[(i, i)].is_finite()) {
        return None;
    }
    Some(chol)
}

/// `log|M|` from a Cholesky factor: twice the sum of log diagonal entries.
pub fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// `log|M|` for a positive definite `M`; `None` otherwise. The empty matrix
/// has log-determinant zero.
pub fn logdet_pd(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    cholesky(m).map(|c| chol_logdet(&c))
}

/// The square block `m[start.., start..]`.
pub fn trailing_block(m: &DMatrix<f64>, start: usize) -> DMatrix<f64> {
    let n = m.nrows() - start;
    m.view((start, start), (n, n)).into_owned()
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_of_known_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((logdet_pd(&a).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(logdet_pd(&DMatrix::zeros(0, 0)), Some(0.0));
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(logdet_pd(&a).is_none());
        let nan = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(logdet_pd(&nan).is_none());
    }

    #[test]
    fn trailing_blocks() {
        let a = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let b = trailing_block(&a, 1);
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[4.0, 5.0, 7.0, 8.0]));
        assert_eq!(trailing_block(&a, 3).nrows(), 0);
    }

    #[test]
    fn ln_2pi_constant() {
        let libm = (2.0 * std::f64::consts::PI).ln();
        assert!((LN_2PI - libm).abs() <= 2.0 * f64::EPSILON);
        assert!((LN_2PI - std::f64::consts::LN_2 - std::f64::consts::PI.ln()).abs() <= 2.0 * f64::EPSILON);
    }
}
