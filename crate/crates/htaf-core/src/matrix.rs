//! Dense row-major f64 matrices.
//!
//! Thin wrapper around `ndarray::Array2<f64>` that enforces the library's
//! numeric contract: every matrix handed out by a public operation contains
//! only finite entries. NaN or infinity anywhere is reported as
//! [`CoreError::NonFinite`] instead of propagating silently. The matrix
//! product dispatches to BLAS when the `openblas` feature (default) is
//! enabled; the semantics are identical either way and are pinned by a
//! triple-loop oracle in the unit tests.

use ndarray::{Array2, Axis};

use crate::error::{CoreError, Result};

/// Two-dimensional f64 matrix with shape `(rows, cols)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    inner: Array2<f64>,
}

impl Matrix {
    /// Matrix of zeros.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            inner: Array2::zeros((rows, cols)),
        }
    }

    /// Matrix of ones.
    pub fn ones(rows: usize, cols: usize) -> Matrix {
        Matrix {
            inner: Array2::ones((rows, cols)),
        }
    }

    /// Builds from nested rows. All rows must have equal length and all
    /// entries must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut flat = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(CoreError::DataLength {
                    rows: n_rows,
                    cols: n_cols,
                    len: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Matrix::from_shape_vec(n_rows, n_cols, flat)
    }

    /// Builds from a row-major flat buffer of exactly `rows * cols` finite
    /// values.
    pub fn from_shape_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(CoreError::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        let inner = Array2::from_shape_vec((rows, cols), data).map_err(|_| {
            CoreError::DataLength {
                rows,
                cols,
                len: rows * cols,
            }
        })?;
        let m = Matrix { inner };
        m.ensure_finite("matrix construction")?;
        Ok(m)
    }

    /// Builds by evaluating `f(row, col)` at every position, in row-major
    /// order.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut flat = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                flat.push(f(r, c));
            }
        }
        Matrix {
            inner: Array2::from_shape_vec((rows, cols), flat)
                .expect("shape matches by construction"),
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.inner[(row, col)] = value;
    }

    /// Entries of one row, left to right.
    pub fn row(&self, row: usize) -> Vec<f64> {
        self.inner.row(row).to_vec()
    }

    /// Entries of one column, top to bottom.
    pub fn col(&self, col: usize) -> Vec<f64> {
        self.inner.column(col).to_vec()
    }

    /// Row-major copy of all entries.
    pub fn to_flat_vec(&self) -> Vec<f64> {
        self.inner.iter().copied().collect()
    }

    /// Rows as nested vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.inner.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(CoreError::NonFinite { context })
        }
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols() != other.rows() {
            return Err(CoreError::DimensionMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let out = Matrix {
            inner: self.inner.dot(&other.inner),
        };
        out.ensure_finite("matmul")?;
        Ok(out)
    }

    /// Matrix product `self * other^T`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols() != other.cols() {
            return Err(CoreError::DimensionMismatch {
                op: "matmul_nt",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let out = Matrix {
            inner: self.inner.dot(&other.inner.t()),
        };
        out.ensure_finite("matmul_nt")?;
        Ok(out)
    }

    /// Matrix product `self^T * other`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows() != other.rows() {
            return Err(CoreError::DimensionMismatch {
                op: "matmul_tn",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let out = Matrix {
            inner: self.inner.t().dot(&other.inner),
        };
        out.ensure_finite("matmul_tn")?;
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix {
            inner: self.inner.t().to_owned(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul_elem(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("mul_elem", other, |a, b| a * b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &Matrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(CoreError::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut inner = self.inner.clone();
        inner.zip_mut_with(&other.inner, |a, &b| *a = f(*a, b));
        let out = Matrix { inner };
        out.ensure_finite(op)?;
        Ok(out)
    }

    /// In-place update `self[i] = f(self[i], other[i])`, for optimizer
    /// steps that should not allocate.
    pub fn zip_update(
        &mut self,
        other: &Matrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CoreError::DimensionMismatch {
                op: "zip_update",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        self.inner.zip_mut_with(&other.inner, |a, &b| *a = f(*a, b));
        self.ensure_finite("zip_update")
    }

    pub fn scale(&self, factor: f64) -> Result<Matrix> {
        let out = Matrix {
            inner: &self.inner * factor,
        };
        out.ensure_finite("scale")?;
        Ok(out)
    }

    /// Applies `f` to every entry. The caller is responsible for `f` mapping
    /// finite inputs to finite outputs; the result is still checked.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        let out = Matrix {
            inner: self.inner.mapv(f),
        };
        out.ensure_finite("map")?;
        Ok(out)
    }

    /// Adds a `1 x cols` row vector to every row.
    pub fn add_row_broadcast(&self, row: &Matrix) -> Result<Matrix> {
        if row.rows() != 1 || row.cols() != self.cols() {
            return Err(CoreError::DimensionMismatch {
                op: "add_row_broadcast",
                lhs: self.shape(),
                rhs: row.shape(),
            });
        }
        let out = Matrix {
            inner: &self.inner + &row.inner.row(0),
        };
        out.ensure_finite("add_row_broadcast")?;
        Ok(out)
    }

    /// Multiplies every row elementwise by a `1 x cols` row vector.
    pub fn mul_row_broadcast(&self, row: &Matrix) -> Result<Matrix> {
        if row.rows() != 1 || row.cols() != self.cols() {
            return Err(CoreError::DimensionMismatch {
                op: "mul_row_broadcast",
                lhs: self.shape(),
                rhs: row.shape(),
            });
        }
        let out = Matrix {
            inner: &self.inner * &row.inner.row(0),
        };
        out.ensure_finite("mul_row_broadcast")?;
        Ok(out)
    }

    /// Column sums as a `1 x cols` matrix.
    pub fn col_sums(&self) -> Matrix {
        let sums = self.inner.sum_axis(Axis(0));
        Matrix {
            inner: sums.insert_axis(Axis(0)),
        }
    }

    /// Column means as a `1 x cols` matrix. Rows must be non-zero.
    pub fn col_means(&self) -> Result<Matrix> {
        if self.rows() == 0 {
            return Err(CoreError::EmptyInput {
                context: "col_means input",
            });
        }
        self.col_sums().scale(1.0 / self.rows() as f64)
    }

    /// Sum of all entries.
    pub fn sum(&self) -> f64 {
        self.inner.sum()
    }

    /// Frobenius norm (square root of the sum of squared entries).
    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Reference product: three nested loops, no shortcuts. Pins the
    /// semantics that the BLAS-backed path must reproduce.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(m, k, n) in &[(1, 1, 1), (2, 3, 4), (5, 4, 3), (7, 7, 7), (16, 9, 33)] {
            let a = random_matrix(&mut rng, m, k);
            let b = random_matrix(&mut rng, k, n);
            let fast = a.matmul(&b).unwrap();
            let slow = matmul_oracle(&a, &b);
            assert_close(&fast, &slow, 1e-12);
        }
    }

    #[test]
    fn matmul_identity_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 4, 4);
        let eye = Matrix::from_fn(4, 4, |r, c| if r == c { 1.0 } else { 0.0 });
        assert_eq!(a.matmul(&eye).unwrap(), a);
        assert_eq!(eye.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_small_example() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn matmul_rejects_inner_dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        match a.matmul(&b) {
            Err(CoreError::DimensionMismatch { op, lhs, rhs }) => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, (2, 3));
                assert_eq!(rhs, (4, 2));
            }
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_matrix(&mut rng, 5, 3);
        let b = random_matrix(&mut rng, 4, 3);
        let nt = a.matmul_nt(&b).unwrap();
        let explicit = a.matmul(&b.transpose()).unwrap();
        assert_close(&nt, &explicit, 1e-12);

        let c = random_matrix(&mut rng, 5, 4);
        let tn = a.matmul_tn(&c).unwrap();
        let explicit = a.transpose().matmul(&c).unwrap();
        assert_close(&tn, &explicit, 1e-12);
    }

    #[test]
    fn from_shape_vec_rejects_wrong_length() {
        match Matrix::from_shape_vec(2, 2, vec![1.0, 2.0, 3.0]) {
            Err(CoreError::DataLength { rows: 2, cols: 2, len: 3 }) => {}
            other => panic!("expected length error, got {other:?}"),
        }
    }

    #[test]
    fn constructors_reject_non_finite_entries() {
        assert!(matches!(
            Matrix::from_shape_vec(1, 2, vec![1.0, f64::NAN]),
            Err(CoreError::NonFinite { .. })
        ));
        assert!(matches!(
            Matrix::from_rows(&[vec![f64::INFINITY]]),
            Err(CoreError::NonFinite { .. })
        ));
    }

    #[test]
    fn scale_overflow_is_an_error_not_infinity() {
        let a = Matrix::from_shape_vec(1, 1, vec![f64::MAX]).unwrap();
        assert!(matches!(
            a.scale(2.0),
            Err(CoreError::NonFinite { .. })
        ));
    }

    #[test]
    fn add_row_broadcast_adds_to_every_row() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let bias = Matrix::from_rows(&[vec![10.0, 20.0]]).unwrap();
        let out = a.add_row_broadcast(&bias).unwrap();
        assert_eq!(out.to_rows(), vec![vec![11.0, 22.0], vec![13.0, 24.0]]);
    }

    #[test]
    fn add_row_broadcast_rejects_wrong_width() {
        let a = Matrix::zeros(2, 3);
        let bias = Matrix::zeros(1, 2);
        assert!(matches!(
            a.add_row_broadcast(&bias),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mul_row_broadcast_scales_columns() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let row = Matrix::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let out = a.mul_row_broadcast(&row).unwrap();
        assert_eq!(out.to_rows(), vec![vec![2.0, -2.0], vec![6.0, -4.0]]);
    }

    #[test]
    fn column_reductions() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(a.col_sums().to_rows(), vec![vec![4.0, 4.0]]);
        assert_eq!(a.col_means().unwrap().to_rows(), vec![vec![2.0, 2.0]]);
        assert_eq!(a.sum(), 8.0);
    }

    #[test]
    fn transpose_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_matrix(&mut rng, 3, 5);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn frobenius_norm_and_max_abs() {
        let a = Matrix::from_rows(&[vec![3.0, -4.0]]).unwrap();
        assert_eq!(a.frobenius_norm(), 5.0);
        assert_eq!(a.max_abs(), 4.0);
    }

    #[test]
    fn elementwise_ops_check_shapes() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(a.add(&b).is_err());
        assert!(a.sub(&b).is_err());
        assert!(a.mul_elem(&b).is_err());
    }
}
