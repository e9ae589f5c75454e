//! Row-major dense matrix used for batched network math.
//!
//! A batch of `n` samples of width `d` is stored as an `n x d` matrix,
//! one sample per row. All arithmetic is `f64`.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. The length must be `rows * cols`
    /// and every entry must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix data length {} != {} x {}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".to_string()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Single-row matrix borrowing a sample vector.
    pub fn from_row(row: &[f64]) -> Result<Self> {
        Self::from_vec(1, row.len(), row.to_vec())
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
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self (n x k) * rhs (k x m) -> n x m`.
    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "mul: inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = rhs.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self (n x k) * rhs^T (m x k) -> n x m`.
    pub fn mul_transpose(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "mul_transpose: widths differ");
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..rhs.rows {
                let b_row = rhs.row(j);
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.data[i * rhs.rows + j] = acc;
            }
        }
        out
    }

    /// `self^T (k x n transposed) * rhs (n x m) -> k x m`.
    pub fn transpose_mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "transpose_mul: row counts differ");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for n in 0..self.rows {
            let a_row = self.row(n);
            let b_row = rhs.row(n);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Adds `v` to every row in place.
    pub fn add_row_vector(&mut self, v: &[f64]) {
        assert_eq!(self.cols, v.len(), "add_row_vector: width mismatch");
        for r in 0..self.rows {
            for (x, &b) in self.row_mut(r).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    /// Column sums, e.g. for bias gradients.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_variants_agree_with_hand_computation() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(a.mul(&b).data(), &[19.0, 22.0, 43.0, 50.0]);
        // a * b^T
        assert_eq!(a.mul_transpose(&b).data(), &[17.0, 23.0, 39.0, 53.0]);
        // a^T * b
        assert_eq!(a.transpose_mul(&b).data(), &[26.0, 30.0, 38.0, 44.0]);
    }

    #[test]
    fn from_vec_rejects_bad_shapes_and_nan() {
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn column_sums_and_row_vector() {
        let mut m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.column_sums(), vec![5.0, 7.0, 9.0]);
        m.add_row_vector(&[1.0, 1.0, 1.0]);
        assert_eq!(m.row(1), &[5.0, 6.0, 7.0]);
    }
}
