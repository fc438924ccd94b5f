//! Shapes, dense tensors and matricization.
//!
//! All linearizations are row-major with the last index fastest. The unfolding
//! `Q_k` groups the leading `k` modes into rows and the trailing `K - k` modes
//! into columns, so the flat value buffer of a tensor is already the row-major
//! buffer of every unfolding.

use std::borrow::Cow;

use crate::error::{Result, TtError};
use crate::Matrix;

/// Largest number of elements any routine will materialize by default.
pub const DEFAULT_DENSE_CAP: usize = 100_000_000;

/// Mode sizes `(I_1, ..., I_K)` of an order-`K` tensor, `K >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    numel: usize,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(TtError::InvalidShape(format!(
                "order must be at least 2, got {}",
                dims.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(TtError::InvalidShape(format!("mode {pos} has size 0")));
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| TtError::InvalidShape(format!("element count of {dims:?} overflows")))?;
        Ok(Self { dims, numel })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Tensor order `K`.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total element count `prod_k I_k`.
    pub fn numel(&self) -> usize {
        self.numel
    }

    /// `I_{<=k}`: product of the leading `k` mode sizes.
    pub fn prefix(&self, k: usize) -> usize {
        self.dims[..k].iter().product()
    }

    /// `I_{k<}`: product of the mode sizes after the leading `k`.
    pub fn suffix(&self, k: usize) -> usize {
        self.dims[k..].iter().product()
    }

    pub fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.dims.len() || index.iter().zip(&self.dims).any(|(&i, &d)| i >= d) {
            return Err(TtError::IndexOutOfRange {
                index: index.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok(())
    }

    /// Row-major linear position of `index`. The index must be in range.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0usize, |acc, (&i, &d)| acc * d + i)
    }

    /// Inverse of [`Shape::linear_index`], written into `out`.
    pub fn unravel(&self, mut linear: usize, out: &mut [usize]) {
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = linear % d;
            linear /= d;
        }
    }

    pub(crate) fn check_split(&self, k: usize) -> Result<()> {
        if k == 0 || k >= self.order() {
            return Err(TtError::InvalidParameter(format!(
                "unfolding split {k} outside 1..={}",
                self.order() - 1
            )));
        }
        Ok(())
    }
}

/// Refuse to materialize more than `cap` elements.
pub fn check_cap(requested: u128, cap: usize) -> Result<()> {
    if requested > cap as u128 {
        return Err(TtError::DenseCapExceeded { requested, cap });
    }
    Ok(())
}

/// Explicit order-`K` array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.numel() {
            return Err(TtError::DimensionMismatch(format!(
                "{} values for shape {:?} with {} elements",
                values.len(),
                shape.dims(),
                shape.numel()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TtError::Numerical("non-finite tensor entry".into()));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let values = vec![0.0; shape.numel()];
        Self { shape, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.values[self.shape.linear_index(index)])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(shape_mismatch(&self.shape, &other.shape));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// `Q_k(X)`: the `I_{<=k} x I_{k<}` unfolding, `1 <= k <= K - 1`.
    pub fn unfold(&self, k: usize) -> Result<Matrix> {
        self.shape.check_split(k)?;
        Ok(Matrix::from_row_slice(
            self.shape.prefix(k),
            self.shape.suffix(k),
            &self.values,
        ))
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, k: usize, shape: &Shape) -> Result<Self> {
        shape.check_split(k)?;
        let (rows, cols) = (shape.prefix(k), shape.suffix(k));
        if m.nrows() != rows || m.ncols() != cols {
            return Err(TtError::DimensionMismatch(format!(
                "matrix is {}x{}, unfolding {k} of {:?} is {rows}x{cols}",
                m.nrows(),
                m.ncols(),
                shape.dims()
            )));
        }
        Self::new(shape.clone(), row_major(m))
    }
}

/// Row-major copy of a matrix's entries.
pub fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub(crate) fn shape_mismatch(a: &Shape, b: &Shape) -> TtError {
    TtError::DimensionMismatch(format!("shapes {:?} and {:?} differ", a.dims(), b.dims()))
}

/// Common read access shared by dense and TT tensors.
pub trait Tensor {
    fn shape(&self) -> &Shape;

    /// Entry at an in-range multi-index.
    fn element(&self, index: &[usize]) -> f64;

    /// Dense view, materializing at most `cap` elements.
    fn to_dense_capped(&self, cap: usize) -> Result<Cow<'_, DenseTensor>>;
}

impl Tensor for DenseTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn element(&self, index: &[usize]) -> f64 {
        self.values[self.shape.linear_index(index)]
    }

    fn to_dense_capped(&self, _cap: usize) -> Result<Cow<'_, DenseTensor>> {
        Ok(Cow::Borrowed(self))
    }
}

/// `||A - B||_F` for any pair of dense or TT tensors of equal shape.
pub fn frobenius_distance<A: Tensor + ?Sized, B: Tensor + ?Sized>(a: &A, b: &B) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_mismatch(a.shape(), b.shape()));
    }
    let a = a.to_dense_capped(DEFAULT_DENSE_CAP)?;
    let b = b.to_dense_capped(DEFAULT_DENSE_CAP)?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
