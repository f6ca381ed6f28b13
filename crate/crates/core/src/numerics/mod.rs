//! Dense complex matrix algebra.
//!
//! [`ComplexMatrix`] is a small row-major container of `Complex64` values with
//! the handful of operations the signal model needs: ordinary products,
//! element-wise (Hadamard) products and quotients, transposes, block slicing
//! and concatenation. The right pseudo-inverse lives in [`pinv`].

mod pinv;

pub use pinv::{gram_condition_number, pinv_svd, right_pinv, DEFAULT_PINV_TOL};

use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use thiserror::Error;

/// Smallest divisor magnitude accepted by [`ComplexMatrix::hadamard_div`].
pub const DIVISOR_FLOOR: f64 = 1e-300;

/// Errors raised by matrix operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadBuffer { rows: usize, cols: usize, len: usize },
    #[error("degenerate divisor at ({row}, {col})")]
    DegenerateDivisor { row: usize, col: usize },
    #[error("matrix is numerically rank deficient: effective rank {effective_rank} of {required}")]
    RankDeficient {
        effective_rank: usize,
        required: usize,
    },
    #[error("right pseudo-inverse needs rows <= cols, got {rows}x{cols}")]
    TooManyRows { rows: usize, cols: usize },
}

/// Dense complex matrix, indexed `(row, col)`.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(r) {
                write!(f, "{:+.6e}{:+.6e}j ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadBuffer {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, Complex64::new(0.0, 0.0))
    }

    pub fn filled(rows: usize, cols: usize, value: Complex64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. All rows must share a length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(LinalgError::BadBuffer {
                    rows: rows.len(),
                    cols,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// A single-row matrix holding `v`.
    pub fn row_vector(v: &[Complex64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [Complex64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Conjugate (Hermitian) transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        // i-k-j ordering keeps the inner loop on contiguous rows of both
        // `other` and `out`.
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<(), LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn hadamard_mul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other, "hadamard_mul")?;
        Ok(self.zip_map(other, |a, b| a * b))
    }

    /// Element-wise quotient. Fails on the first divisor whose magnitude is at
    /// or below [`DIVISOR_FLOOR`].
    pub fn hadamard_div(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other, "hadamard_div")?;
        if let Some(pos) = other.data.iter().position(|b| b.norm() <= DIVISOR_FLOOR) {
            return Err(LinalgError::DegenerateDivisor {
                row: pos / other.cols.max(1),
                col: pos % other.cols.max(1),
            });
        }
        Ok(self.zip_map(other, |a, b| a / b))
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_map(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Squared Frobenius norm, `sum |a_ij|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Copy of the columns in `range`.
    pub fn columns(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols, "column range out of bounds");
        let width = range.len();
        Self::from_fn(self.rows, width, |r, c| self.get(r, range.start + c))
    }

    /// Copy of the rows in `range`.
    pub fn row_block(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.rows, "row range out of bounds");
        Self {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// `[self, other]`.
    pub fn hcat(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.rows != other.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "hcat",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        })
    }

    /// `[self; other]`.
    pub fn vcat(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "vcat",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Largest element-wise distance to `other`, for tolerance checks.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Kronecker product of two vectors: `out[i * n + j] = u[i] * v[j]`.
pub fn kronecker(u: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    u.iter()
        .flat_map(|&a| v.iter().map(move |&b| a * b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_times_matrix() {
        let b = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(3.0, -1.0)], vec![c(0.5, 0.0), c(0.0, 4.0)]])
            .unwrap();
        let out = ComplexMatrix::identity(2).matmul(&b).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn row_times_column_cancels() {
        let a = ComplexMatrix::row_vector(&[c(1.0, 0.0), c(0.0, 1.0)]);
        let b = a.transpose();
        let out = a.matmul(&b).unwrap();
        assert_eq!(out.shape(), (1, 1));
        assert_eq!(out.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn matmul_shape_mismatch_names_shapes() {
        let err = ComplexMatrix::zeros(2, 3)
            .matmul(&ComplexMatrix::zeros(4, 2))
            .unwrap_err();
        assert_eq!(
            err,
            LinalgError::DimensionMismatch {
                op: "matmul",
                left: (2, 3),
                right: (4, 2)
            }
        );
        assert!(err.to_string().contains("(2, 3)") && err.to_string().contains("(4, 2)"));
    }

    #[test]
    fn hadamard_examples() {
        let a = ComplexMatrix::row_vector(&[c(2.0, 0.0), c(0.0, 1.0)]);
        let b = ComplexMatrix::row_vector(&[c(3.0, 0.0), c(0.0, -1.0)]);
        let prod = a.hadamard_mul(&b).unwrap();
        assert_eq!(prod, ComplexMatrix::row_vector(&[c(6.0, 0.0), c(1.0, 0.0)]));
        assert_eq!(prod.hadamard_div(&b).unwrap(), a);

        let ones = ComplexMatrix::filled(1, 2, c(1.0, 0.0));
        assert_eq!(a.hadamard_mul(&ones).unwrap(), a);
        assert_eq!(a.hadamard_div(&a).unwrap(), ones);

        assert!(matches!(
            ComplexMatrix::zeros(2, 2).hadamard_mul(&ComplexMatrix::zeros(2, 3)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hadamard_div_reports_zero_position() {
        let a = ComplexMatrix::filled(2, 3, c(1.0, 1.0));
        let mut b = ComplexMatrix::filled(2, 3, c(1.0, 0.0));
        b.set(1, 2, c(0.0, 0.0));
        assert_eq!(
            a.hadamard_div(&b).unwrap_err(),
            LinalgError::DegenerateDivisor { row: 1, col: 2 }
        );
    }

    #[test]
    fn kronecker_examples() {
        let v = [c(1.0, 0.0), c(0.0, 1.0)];
        assert_eq!(kronecker(&[c(1.0, 0.0)], &v), v.to_vec());
        assert_eq!(
            kronecker(&[c(1.0, 0.0), c(-1.0, 0.0)], &v),
            vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]
        );
        assert_eq!(kronecker(&[c(2.0, 1.0)], &[c(0.0, 3.0)]), vec![c(2.0, 1.0) * c(0.0, 3.0)]);
    }

    #[test]
    fn block_slicing_and_concat() {
        let m = ComplexMatrix::from_fn(3, 4, |r, c| Complex64::new(r as f64, c as f64));
        let left = m.columns(0..1);
        let right = m.columns(1..4);
        assert_eq!(left.hcat(&right).unwrap(), m);
        let top = m.row_block(0..2);
        let bottom = m.row_block(2..3);
        assert_eq!(top.vcat(&bottom).unwrap(), m);
        assert_eq!(m.row_block(0..0).shape(), (0, 4));
    }

    #[test]
    fn adjoint_conjugates() {
        let m = ComplexMatrix::row_vector(&[c(1.0, 2.0), c(3.0, -4.0)]);
        let h = m.adjoint();
        assert_eq!(h.shape(), (2, 1));
        assert_eq!(h.get(1, 0), c(3.0, 4.0));
    }
}
