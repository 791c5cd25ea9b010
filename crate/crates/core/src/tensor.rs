//! Dense 64-bit tensors, the value type threaded through the autodiff tape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("value count {count} does not match shape {shape:?}")]
    BadValueCount { shape: Vec<usize>, count: usize },
}

/// Dense row-major tensor of f64 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(TensorError::BadValueCount {
                shape,
                count: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; count],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Row-major matrix constructor; panics if rows are ragged.
    pub fn matrix(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a scalar (or 1-element) tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Reinterpret the underlying buffer with a new shape of equal size.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor, TensorError> {
        let count: usize = shape.iter().product();
        if count != self.data.len() {
            return Err(TensorError::BadValueCount {
                shape,
                count: self.data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }
}

/// out = a @ b for 2-D tensors, written as plain loops over row-major data.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.cols() != b.rows() {
        return Err(TensorError::ShapeMismatch {
            expected: vec![a.shape.last().copied().unwrap_or(0)],
            got: b.shape.clone(),
        });
    }
    let (n, p, q) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * q];
    for i in 0..n {
        for k in 0..p {
            let aik = a.data[i * p + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * q..(k + 1) * q];
            let orow = &mut out[i * q..(i + 1) * q];
            for j in 0..q {
                orow[j] += aik * brow[j];
            }
        }
    }
    Tensor::new(vec![n, q], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_count() {
        assert!(Tensor::new(vec![2, 2], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn matmul_matches_identity() {
        let eye = Tensor::matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let w = Tensor::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = matmul(&eye, &w).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn matmul_rejects_mismatched_inner() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 2]);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]);
        let m = t.reshape(vec![2, 2]).unwrap();
        assert_eq!(m.get2(1, 0), 3.0);
        assert!(t.reshape(vec![3, 2]).is_err());
    }
}
