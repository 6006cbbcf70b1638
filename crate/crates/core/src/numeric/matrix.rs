use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix[{}x{}]", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list()
                .entries(self.data.chunks(self.cols.max(1)))
                .finish()?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row 0 has {cols} columns"),
                    format!("row {i} has {}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
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
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the column range `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        assert!(
            start <= end && end <= self.cols,
            "column range out of bounds"
        );
        let width = end - start;
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape("hconcat", self.shape_str(), other.shape_str()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Vertical concatenation.
    pub fn vconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape("vconcat", self.shape_str(), other.shape_str()));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// `self · other`
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", self.shape_str(), other.shape_str()));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(Operand::plain(self), Operand::plain(other), &mut out, false);
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_t",
                self.shape_str(),
                other.shape_str(),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(
            Operand::plain(self),
            Operand::transposed(other),
            &mut out,
            false,
        );
        Ok(out)
    }

    /// `selfᵀ · other`, added into `acc` (used for gradient accumulation).
    pub fn t_matmul_acc(&self, other: &Matrix, acc: &mut Matrix) -> Result<()> {
        if self.rows != other.rows || acc.rows != self.cols || acc.cols != other.cols {
            return Err(Error::shape(
                "t_matmul_acc",
                format!("{}ᵀ·{}", self.shape_str(), other.shape_str()),
                acc.shape_str(),
            ));
        }
        gemm(Operand::transposed(self), Operand::plain(other), acc, true);
        Ok(())
    }

    /// Column sums, added into `acc`.
    pub fn col_sums_acc(&self, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.cols);
        for r in 0..self.rows {
            for (a, v) in acc.iter_mut().zip(self.row(r)) {
                *a += v;
            }
        }
    }

    pub fn add_row_vector(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            for (x, b) in self.row_mut(r).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }
}

struct Operand<'a> {
    m: &'a Matrix,
    transposed: bool,
}

impl<'a> Operand<'a> {
    fn plain(m: &'a Matrix) -> Self {
        Operand {
            m,
            transposed: false,
        }
    }
    fn transposed(m: &'a Matrix) -> Self {
        Operand {
            m,
            transposed: true,
        }
    }
    fn dims(&self) -> (usize, usize) {
        if self.transposed {
            (self.m.cols, self.m.rows)
        } else {
            (self.m.rows, self.m.cols)
        }
    }
    fn strides(&self) -> (isize, isize) {
        let c = self.m.cols as isize;
        if self.transposed {
            (1, c)
        } else {
            (c, 1)
        }
    }
}

fn gemm(a: Operand<'_>, b: Operand<'_>, out: &mut Matrix, accumulate: bool) {
    let (m, k) = a.dims();
    let (_, n) = b.dims();
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            out.fill(0.0);
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: pointers and strides describe the row-major buffers owned by
    // `a`, `b` and `out`, whose dimensions were validated by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.m.data.as_ptr(),
            rsa,
            csa,
            b.m.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn transpose(a: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(a.cols(), a.rows());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                t.set(j, i, a.get(i, j));
            }
        }
        t
    }

    fn sample(rows: usize, cols: usize, salt: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|i| ((i as f64 + salt) * 0.37).sin())
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Matrix::from_vec(2, 3, vec![0.0; 5]).is_err());
        assert!(Matrix::from_vec(2, 3, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn gemm_variants_agree_with_naive_product() {
        let a = sample(5, 7, 0.0);
        let b = sample(7, 3, 1.0);
        let expected = naive(&a, &b);
        let got = a.matmul(&b).unwrap();
        for (x, y) in got.as_slice().iter().zip(expected.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let bt = transpose(&b);
        let got_t = a.matmul_t(&bt).unwrap();
        for (x, y) in got_t.as_slice().iter().zip(expected.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let at = transpose(&a);
        let mut acc = Matrix::filled(5, 3, 1.0);
        at.t_matmul_acc(&b, &mut acc).unwrap();
        for (x, y) in acc.as_slice().iter().zip(expected.as_slice()) {
            assert!((x - (y + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = sample(2, 3, 0.0).matmul(&sample(2, 3, 0.0)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "{msg}");
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let a = sample(3, 2, 0.0);
        let b = sample(3, 4, 2.0);
        let ab = a.hconcat(&b).unwrap();
        assert_eq!(ab.shape(), (3, 6));
        assert_eq!(ab.columns(0, 2), a);
        assert_eq!(ab.columns(2, 6), b);
        let v = a.vconcat(&a).unwrap();
        assert_eq!(v.select_rows(&[3, 4, 5]), a);
    }
}
