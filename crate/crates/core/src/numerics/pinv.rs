//! Moore-Penrose right pseudo-inverse.
//!
//! The steering matrix is short and wide (K users by M antennas, K << M), so
//! the common path forms the K x K Gram matrix `A A^H`, factors it with a
//! Cholesky decomposition and returns `A^H (A A^H)^-1`. When the Cholesky
//! pivots suggest the Gram matrix is ill conditioned the computation falls
//! back to an SVD with a relative singular-value cutoff.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

/// Default relative tolerance for [`right_pinv`].
pub const DEFAULT_PINV_TOL: f64 = 1e-9;

/// Right pseudo-inverse of a full-row-rank `K x M` matrix (`K <= M`).
///
/// Returns an `M x K` matrix `P` with `A P = I_K`. Fails with
/// [`LinalgError::RankDeficient`] when any singular value of `A` falls below
/// `tol * sigma_max`.
pub fn right_pinv(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix, LinalgError> {
    let (k, m) = a.shape();
    if k > m {
        return Err(LinalgError::TooManyRows { rows: k, cols: m });
    }
    if k == 0 {
        return Ok(ComplexMatrix::zeros(m, 0));
    }
    let gram = a.matmul(&a.adjoint())?;
    match cholesky(&gram) {
        Some(chol) if chol.condition_estimate() <= 1.0 / tol => {
            // A^+ = A^H G^-1 = (G^-1 A)^H since G is Hermitian.
            let x = chol.solve(a);
            Ok(x.adjoint())
        }
        _ => {
            let (pinv, rank) = svd_pinv(a, tol);
            if rank < k {
                return Err(LinalgError::RankDeficient {
                    effective_rank: rank,
                    required: k,
                });
            }
            Ok(pinv)
        }
    }
}

/// General SVD-based pseudo-inverse of any shape. Singular values at or below
/// `tol * sigma_max` are treated as zero.
pub fn pinv_svd(a: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    svd_pinv(a, tol).0
}

/// Condition number of `A A^H`, i.e. `(sigma_max / sigma_min)^2` of `A`.
pub fn gram_condition_number(a: &ComplexMatrix) -> f64 {
    let sv = to_nalgebra(a).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

fn to_nalgebra(a: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn svd_pinv(a: &ComplexMatrix, tol: f64) -> (ComplexMatrix, usize) {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return (ComplexMatrix::zeros(cols, rows), 0);
    }
    let svd = to_nalgebra(a).svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = tol * sigma_max;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut rank = 0;
    let mut out = ComplexMatrix::zeros(cols, rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if !(s > cutoff) {
            continue;
        }
        rank += 1;
        let inv = 1.0 / s;
        // out += v_i * inv * u_i^H, with v_i = conj(row i of v_t).
        for r in 0..cols {
            let v = v_t[(i, r)].conj() * inv;
            let row = out.row_mut(r);
            for (c, o) in row.iter_mut().enumerate() {
                *o += v * u[(c, i)].conj();
            }
        }
    }
    (out, rank)
}

/// Lower-triangular Cholesky factor `L` of a Hermitian matrix, `G = L L^H`.
struct Cholesky {
    n: usize,
    l: Vec<Complex64>,
}

fn cholesky(g: &ComplexMatrix) -> Option<Cholesky> {
    let n = g.rows();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = g.get(j, j).re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(Cholesky { n, l })
}

impl Cholesky {
    /// Cheap lower bound on `cond(G)` from the pivot spread.
    fn condition_estimate(&self) -> f64 {
        let diag = (0..self.n).map(|i| self.l[i * self.n + i].re);
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        (hi / lo).powi(2)
    }

    /// Solves `G X = B` column by column.
    fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        let mut x = b.clone();
        for col in 0..b.cols() {
            // L y = b
            for i in 0..n {
                let mut s = x.get(i, col);
                for k in 0..i {
                    s -= self.l[i * n + k] * x.get(k, col);
                }
                x.set(i, col, s / self.l[i * n + i]);
            }
            // L^H x = y
            for i in (0..n).rev() {
                let mut s = x.get(i, col);
                for k in i + 1..n {
                    s -= self.l[k * n + i].conj() * x.get(k, col);
                }
                x.set(i, col, s / self.l[i * n + i]);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn identity_is_its_own_pinv() {
        let i3 = ComplexMatrix::identity(3);
        assert!(right_pinv(&i3, DEFAULT_PINV_TOL).unwrap().max_abs_diff(&i3) < 1e-15);
    }

    #[test]
    fn row_of_ones_closed_form() {
        let a = ComplexMatrix::row_vector(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let p = right_pinv(&a, DEFAULT_PINV_TOL).unwrap();
        let expected = ComplexMatrix::from_rows(&[vec![c(0.5, 0.0)], vec![c(0.5, 0.0)]]).unwrap();
        assert!(p.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn tall_matrix_rejected() {
        assert_eq!(
            right_pinv(&ComplexMatrix::zeros(3, 2), DEFAULT_PINV_TOL).unwrap_err(),
            LinalgError::TooManyRows { rows: 3, cols: 2 }
        );
    }

    #[test]
    fn rank_deficient_reports_rank() {
        let row = vec![c(1.0, 0.5), c(-0.3, 2.0), c(0.7, 0.0)];
        let a = ComplexMatrix::from_rows(&[row.clone(), row.iter().map(|v| v * 2.0).collect(), vec![c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        assert_eq!(
            right_pinv(&a, DEFAULT_PINV_TOL).unwrap_err(),
            LinalgError::RankDeficient {
                effective_rank: 2,
                required: 3
            }
        );
    }

    #[test]
    fn cholesky_and_svd_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 6, 20);
        let fast = right_pinv(&a, DEFAULT_PINV_TOL).unwrap();
        let slow = pinv_svd(&a, DEFAULT_PINV_TOL);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
        let eye = a.matmul(&fast).unwrap();
        assert!(eye.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-12);
    }

    #[test]
    fn ill_conditioned_falls_back_to_svd() {
        // Two nearly parallel rows: Gram condition ~1e20 forces the fallback,
        // and the SVD then finds the rank deficiency.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random_matrix(&mut rng, 1, 8);
        let mut second = base.clone();
        second.set(0, 0, second.get(0, 0) + c(1e-10, 0.0));
        let a = base.vcat(&second).unwrap();
        assert!(gram_condition_number(&a) > 1e9);
        assert!(matches!(
            right_pinv(&a, DEFAULT_PINV_TOL),
            Err(LinalgError::RankDeficient { effective_rank: 1, required: 2 })
        ));
    }

    #[test]
    fn general_pinv_of_rank_one_matrix() {
        // [[1, 1], [1, 1]]^+ = [[1, 1], [1, 1]] / 4
        let a = ComplexMatrix::filled(2, 2, c(1.0, 0.0));
        let p = pinv_svd(&a, DEFAULT_PINV_TOL);
        assert!(p.max_abs_diff(&ComplexMatrix::filled(2, 2, c(0.25, 0.0))) < 1e-14);
    }
}
