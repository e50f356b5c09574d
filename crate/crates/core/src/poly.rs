use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial in a scaled variable: `p(x) = Σ_k c[k] (x / scale)^k`.
///
/// The scale keeps the basis well conditioned over `|x| <= scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
    pub scale: f64,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>, scale: f64) -> Self {
        assert!(scale > 0.0 && scale.is_finite(), "polynomial scale must be positive");
        Self { coeffs, scale }
    }

    pub fn zero(scale: f64) -> Self {
        Self::new(Vec::new(), scale)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = x / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c / self.scale)
            .collect();
        Polynomial::new(coeffs, self.scale)
    }

    /// Express the same function in a new scale variable.
    pub fn rescaled(&self, scale: f64) -> Polynomial {
        let r = scale / self.scale;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * r.powi(k as i32))
            .collect();
        Polynomial::new(coeffs, scale)
    }

    /// Multiply every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect(), self.scale)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let other = other.rescaled(self.scale);
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Polynomial::new(coeffs, self.scale)
    }

    /// Copy with the constant and linear coefficients zeroed.
    pub fn without_affine(&self) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        for c in coeffs.iter_mut().take(2) {
            *c = 0.0;
        }
        Polynomial::new(coeffs, self.scale)
    }

    /// Least-squares fit using only the monomial orders in `min_order..=max_order`.
    /// Returns the polynomial and the RMS residual.
    pub fn fit(xs: &[f64], ys: &[f64], min_order: usize, max_order: usize, scale: f64) -> Result<(Polynomial, f64)> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput("fit: abscissa/ordinate length mismatch".into()));
        }
        if max_order < min_order {
            return Err(Error::InvalidInput("fit: empty order range".into()));
        }
        let terms = max_order - min_order + 1;
        if xs.len() < terms {
            return Err(Error::InvalidInput(format!(
                "fit: {} samples cannot determine {terms} coefficients",
                xs.len()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput("fit: scale must be positive".into()));
        }
        let a = DMatrix::from_fn(xs.len(), terms, |i, j| (xs[i] / scale).powi((min_order + j) as i32));
        let b = DVector::from_column_slice(ys);
        let svd = a.clone().svd(true, true);
        let sol = svd
            .solve(&b, 1e-13)
            .map_err(|e| Error::InvalidInput(format!("fit: {e}")))?;
        let mut coeffs = vec![0.0; max_order + 1];
        for j in 0..terms {
            coeffs[min_order + j] = sol[j];
        }
        let resid = &a * &sol - &b;
        let rms = (resid.norm_squared() / xs.len() as f64).sqrt();
        Ok((Polynomial::new(coeffs, scale), rms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivatives() {
        // 1 + 2u - 3u^2 with u = x/2
        let p = Polynomial::new(vec![1.0, 2.0, -3.0], 2.0);
        assert!((p.eval(1.0) - (1.0 + 1.0 - 0.75)).abs() < 1e-15);
        let d = p.derivative();
        // d/dx = (2 - 6u)/2
        assert!((d.eval(1.0) - (2.0 - 3.0) / 2.0).abs() < 1e-15);
        let dd = d.derivative();
        assert!((dd.eval(0.3) + 6.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_preserves_function() {
        let p = Polynomial::new(vec![0.5, -1.0, 2.0, 0.25], 3.0);
        let q = p.rescaled(7.0);
        for x in [-3.0, -0.2, 1.9, 4.4] {
            assert!((p.eval(x) - q.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_selected_orders() {
        let xs: Vec<f64> = (0..101).map(|i| -1.0 + 0.02 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x - 0.5 * x.powi(5)).collect();
        let (p, rms) = Polynomial::fit(&xs, &ys, 2, 6, 1.0).unwrap();
        assert!(rms < 1e-12);
        assert_eq!(p.coeff(0), 0.0);
        assert_eq!(p.coeff(1), 0.0);
        assert!((p.coeff(2) - 3.0).abs() < 1e-10);
        assert!((p.coeff(5) + 0.5).abs() < 1e-10);
    }

    #[test]
    fn fit_rejects_underdetermined() {
        assert!(Polynomial::fit(&[0.0, 1.0], &[0.0, 1.0], 0, 4, 1.0).is_err());
    }
}
