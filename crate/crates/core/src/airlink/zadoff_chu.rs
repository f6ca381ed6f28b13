use std::f64::consts::PI;

use num_complex::Complex64;

use super::AirlinkError;
use crate::numerics::ComplexMatrix;

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Cyclically shifted Zadoff-Chu sequence.
///
/// Entry `n` uses `m = (n + shift) mod length` and phase
/// `-pi * root * m (m + 1) / length` for odd lengths, `m^2` in place of
/// `m (m + 1)` for even ones.
pub fn zadoff_chu(length: usize, root: usize, shift: usize) -> Result<Vec<Complex64>, AirlinkError> {
    if length == 0 || gcd(root, length) != 1 {
        return Err(AirlinkError::RootNotCoprime { root, length });
    }
    if shift >= length {
        return Err(AirlinkError::ShiftOutOfRange { shift, length });
    }
    let n = length as u128;
    let two_n = 2 * n;
    Ok((0..length)
        .map(|i| {
            let m = ((i + shift) % length) as u128;
            let quad = if length % 2 == 1 { m * (m + 1) } else { m * m };
            // exp(-j pi x / N) is periodic in x with period 2N.
            let x = (root as u128 * quad) % two_n;
            Complex64::from_polar(1.0, -PI * x as f64 / n as f64)
        })
        .collect())
}

/// K x P pilot matrix; user `k` sends the root sequence shifted by `k`.
pub fn build_pilot_matrix(k_users: usize, p: usize, root: usize) -> Result<ComplexMatrix, AirlinkError> {
    if p < k_users {
        return Err(AirlinkError::TooFewPilots { pilots: p, users: k_users });
    }
    let rows = (0..k_users)
        .map(|k| zadoff_chu(p, root, k))
        .collect::<Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Ok(ComplexMatrix::zeros(0, p));
    }
    Ok(ComplexMatrix::from_rows(&rows).expect("equal lengths"))
}
