//! Dense row-major `f64` tensors.
//!
//! Only what the diffusion code needs: elementwise arithmetic with scalar
//! broadcast, a few reductions, and row access for `[batch, dim]` data.
//! Every operation that can create a non-finite value checks for it.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

fn ensure_finite(data: &[f64], op: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n = check_shape(&shape)?;
        if n != data.len() {
            return Err(Error::ShapeMismatch { left: shape, right: vec![data.len()] });
        }
        ensure_finite(&data, "Tensor::new")?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        let n = check_shape(shape)?;
        Self::new(shape.to_vec(), vec![value; n])
    }

    /// A one-element tensor that broadcasts against any shape.
    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1], data: vec![value] }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    /// Builds a `[rows.len(), dim]` tensor.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::ShapeMismatch { left: vec![dim], right: vec![row.len()] });
            }
            data.extend_from_slice(row);
        }
        Self::new(vec![rows.len(), dim], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable view for in-place updates; callers keep values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Leading (batch) dimension.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Product of the trailing dimensions.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let n = check_shape(&shape)?;
        if n != self.data.len() {
            return Err(Error::ShapeMismatch { left: self.shape.clone(), right: shape });
        }
        Ok(Self { shape, data: self.data.clone() })
    }

    /// Elementwise map; fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        ensure_finite(&data, "map")?;
        Ok(Self { shape: self.shape.clone(), data })
    }

    /// Elementwise binary map with scalar broadcast on either side.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (shape, data): (Vec<usize>, Vec<f64>) = if self.shape == other.shape {
            let d = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
            (self.shape.clone(), d)
        } else if other.is_scalar() {
            let b = other.data[0];
            (self.shape.clone(), self.data.iter().map(|&a| f(a, b)).collect())
        } else if self.is_scalar() {
            let a = self.data[0];
            (other.shape.clone(), other.data.iter().map(|&b| f(a, b)).collect())
        } else {
            return Err(Error::ShapeMismatch { left: self.shape.clone(), right: other.shape.clone() });
        };
        ensure_finite(&data, "zip_map")?;
        Ok(Self { shape, data })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Result<Self> {
        self.map(|v| v * k)
    }

    /// `a*self + b*other`, the workhorse of every diffusion update.
    pub fn lincomb(&self, a: f64, other: &Tensor, b: f64) -> Result<Self> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Population variance (divides by n).
    pub fn var(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { left: self.shape.clone(), right: other.shape.clone() });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { left: self.shape.clone(), right: other.shape.clone() });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Per-column mean of a `[n, d]` tensor.
    pub fn column_means(&self) -> Vec<f64> {
        let (n, d) = (self.rows(), self.row_len());
        let mut m = vec![0.0; d];
        for i in 0..n {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n as f64);
        m
    }

    /// Per-column population variance of a `[n, d]` tensor.
    pub fn column_vars(&self) -> Vec<f64> {
        let m = self.column_means();
        let (n, d) = (self.rows(), self.row_len());
        let mut v = vec![0.0; d];
        for i in 0..n {
            for ((acc, x), mu) in v.iter_mut().zip(self.row(i)).zip(&m) {
                *acc += (x - mu) * (x - mu);
            }
        }
        v.iter_mut().for_each(|x| *x /= n as f64);
        v
    }

    /// Repeats a single row `n` times, producing `[n, ...shape]`.
    pub fn broadcast_rows(row: &[f64], n: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(row.len() * n);
        for _ in 0..n {
            data.extend_from_slice(row);
        }
        Self::new(vec![n, row.len()], data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_and_scale() {
        let a = Tensor::from_vec(vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(a.scale(0.0).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn scalar_broadcast_both_sides() {
        let a = Tensor::from_vec(vec![1.0, 2.0, 3.0]).unwrap();
        let s = Tensor::scalar(2.0);
        assert_eq!(a.mul(&s).unwrap().data(), &[2.0, 4.0, 6.0]);
        assert_eq!(s.sub(&a).unwrap().data(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]).unwrap();
        let b = Tensor::zeros(&[3, 2]).unwrap();
        let msg = a.add(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(Tensor::zeros(&[0]), Err(Error::InvalidShape(_))));
        assert!(Tensor::new(vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn non_finite_reported() {
        let a = Tensor::from_vec(vec![1.0, 0.0]).unwrap();
        assert!(matches!(a.map(|v| 1.0 / v), Err(Error::NonFinite(_))));
        assert!(Tensor::from_vec(vec![f64::NAN]).is_err());
    }

    #[test]
    fn reductions() {
        let a = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.mean(), 2.5);
        assert_eq!(a.var(), 1.25);
        assert_eq!(a.dot(&a).unwrap(), 30.0);
        let m = a.reshape(vec![2, 2]).unwrap();
        assert_eq!(m.column_means(), vec![2.0, 3.0]);
        assert_eq!(m.column_vars(), vec![1.0, 1.0]);
    }
}
