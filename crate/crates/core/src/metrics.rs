//! Estimation and detection quality measures.

use thiserror::Error;

use crate::estimators::Method;
use crate::numerics::{ComplexMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error(transparent)]
    Shape(#[from] LinalgError),
    #[error("NMSE reference has zero energy")]
    ZeroReference,
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
}

fn same_shape(op: &'static str, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<(), MetricError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        }
        .into());
    }
    Ok(())
}

/// `||ref - est||^2 / ||ref||^2` over all entries.
pub fn nmse(reference: &ComplexMatrix, estimate: &ComplexMatrix) -> Result<f64, MetricError> {
    same_shape("nmse", reference, estimate)?;
    let den = reference.norm_sqr();
    if !(den > 0.0) {
        return Err(MetricError::ZeroReference);
    }
    let num: f64 = reference
        .as_slice()
        .iter()
        .zip(estimate.as_slice())
        .map(|(r, e)| (r - e).norm_sqr())
        .sum();
    Ok(num / den)
}

/// Fraction of entries where `detected` differs from `truth`.
pub fn ser(truth: &ComplexMatrix, detected: &ComplexMatrix) -> Result<f64, MetricError> {
    same_shape("ser", truth, detected)?;
    let n = truth.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let errors = truth.as_slice().iter().zip(detected.as_slice()).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / n as f64)
}

/// Per-entry signal energy over `sigma2`, in dB.
pub fn empirical_snr(noiseless: &ComplexMatrix, sigma2: f64) -> Result<f64, MetricError> {
    if !(sigma2 > 0.0) {
        return Err(MetricError::NonPositiveNoise(sigma2));
    }
    let per_entry = noiseless.norm_sqr() / noiseless.as_slice().len() as f64;
    Ok(10.0 * (per_entry / sigma2).log10())
}

/// One aggregated cell of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub method: Method,
    pub snr_db: f64,
    pub block: Option<usize>,
    pub nmse: Option<f64>,
    pub ser: Option<f64>,
    /// Trials that contributed (attempted minus skipped).
    pub trials: usize,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::calibrate_sigma2;
    use num_complex::Complex64;

    fn sample() -> ComplexMatrix {
        ComplexMatrix::from_fn(3, 4, |r, c| Complex64::new(r as f64 - 1.5, 0.3 * c as f64 + 0.1))
    }

    #[test]
    fn nmse_examples() {
        let r = sample();
        assert_eq!(nmse(&r, &r).unwrap(), 0.0);
        assert_eq!(nmse(&r, &ComplexMatrix::zeros(3, 4)).unwrap(), 1.0);
        assert!((nmse(&r, &r.scale(Complex64::new(2.0, 0.0))).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(nmse(&ComplexMatrix::zeros(2, 2), &ComplexMatrix::zeros(2, 2)), Err(MetricError::ZeroReference));
        assert!(nmse(&r, &ComplexMatrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn ser_examples() {
        let a = ComplexMatrix::filled(10, 15, Complex64::new(1.0, 1.0));
        assert_eq!(ser(&a, &a).unwrap(), 0.0);
        let b = ComplexMatrix::filled(10, 15, Complex64::new(-1.0, 1.0));
        assert_eq!(ser(&a, &b).unwrap(), 1.0);
        let mut c = a.clone();
        c.set(4, 7, Complex64::new(3.0, 3.0));
        assert_eq!(ser(&a, &c).unwrap(), 1.0 / 150.0);
        assert!(ser(&a, &ComplexMatrix::zeros(15, 10)).is_err());
    }

    #[test]
    fn snr_examples() {
        let ones = ComplexMatrix::filled(5, 8, Complex64::new(1.0, 0.0));
        assert!(empirical_snr(&ones, 1.0).unwrap().abs() < 1e-15);
        assert!((empirical_snr(&ones, 0.5).unwrap() - 3.010299956639812).abs() < 1e-12);
        assert!(empirical_snr(&ones, 0.0).is_err());
        let s = sample();
        for target in [-10.0, 0.0, 7.5, 20.0] {
            let sigma2 = calibrate_sigma2(target, &s).unwrap();
            assert!((empirical_snr(&s, sigma2).unwrap() - target).abs() < 1e-12);
        }
    }
}
