//! Tensor-train format.
//!
//! A TT tensor stores one order-3 core `G_k` of shape `(I_k, R_{k-1}, R_k)` per
//! mode, with `R_0 = R_K = 1`, and evaluates
//! `X[i_1, ..., i_K] = G_1[i_1] G_2[i_2] ... G_K[i_K]` as a chain of small
//! matrix products. Core indices in this module are 0-based.

use std::borrow::Cow;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, TtError};
use crate::rng;
use crate::tensor::{check_cap, DenseTensor, Shape, Tensor, DEFAULT_DENSE_CAP};
use crate::Matrix;

/// One TT core, stored row-major over `(i, r_left, r_right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    dim: usize,
    rank_left: usize,
    rank_right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(dim: usize, rank_left: usize, rank_right: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || rank_left == 0 || rank_right == 0 {
            return Err(TtError::InvalidShape(format!(
                "core extents ({dim}, {rank_left}, {rank_right}) must be positive"
            )));
        }
        if data.len() != dim * rank_left * rank_right {
            return Err(TtError::DimensionMismatch(format!(
                "core ({dim}, {rank_left}, {rank_right}) given {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TtError::Numerical("non-finite core entry".into()));
        }
        Ok(Self {
            dim,
            rank_left,
            rank_right,
            data,
        })
    }

    pub fn zeros(dim: usize, rank_left: usize, rank_right: usize) -> Self {
        Self {
            dim,
            rank_left,
            rank_right,
            data: vec![0.0; dim * rank_left * rank_right],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank_left(&self) -> usize {
        self.rank_left
    }

    pub fn rank_right(&self) -> usize {
        self.rank_right
    }

    /// Number of parameters, `I_k R_{k-1} R_k`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat parameters `vec(G_k)`, ordered `(i, r_left, r_right)` row-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Slice `G_k[i, :, :]` as a row-major `R_{k-1} x R_k` block.
    pub fn slice(&self, i: usize) -> &[f64] {
        let block = self.rank_left * self.rank_right;
        &self.data[i * block..(i + 1) * block]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Row vector times slice: `out = v * G[i]`.
#[inline]
pub(crate) fn row_times_slice(v: &[f64], core: &Core, i: usize, out: &mut Vec<f64>) {
    let (rl, rr) = (core.rank_left, core.rank_right);
    let s = core.slice(i);
    out.clear();
    out.resize(rr, 0.0);
    for (a, &va) in v.iter().enumerate().take(rl) {
        if va == 0.0 {
            continue;
        }
        let row = &s[a * rr..(a + 1) * rr];
        for (o, &g) in out.iter_mut().zip(row) {
            *o += va * g;
        }
    }
}

/// Slice times column vector: `out = G[i] * v`.
#[inline]
pub(crate) fn slice_times_col(core: &Core, i: usize, v: &[f64], out: &mut Vec<f64>) {
    let (rl, rr) = (core.rank_left, core.rank_right);
    let s = core.slice(i);
    out.clear();
    out.extend((0..rl).map(|a| {
        s[a * rr..(a + 1) * rr]
            .iter()
            .zip(v)
            .map(|(g, x)| g * x)
            .sum::<f64>()
    }));
}

/// Tensor in TT format. TT ranks are implied by the core shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct TtTensor {
    shape: Shape,
    cores: Vec<Core>,
}

impl TtTensor {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        let shape = Shape::new(cores.iter().map(Core::dim).collect())?;
        if cores[0].rank_left != 1 || cores[cores.len() - 1].rank_right != 1 {
            return Err(TtError::InvalidShape("boundary TT ranks must be 1".into()));
        }
        for (k, pair) in cores.windows(2).enumerate() {
            if pair[0].rank_right != pair[1].rank_left {
                return Err(TtError::InvalidShape(format!(
                    "core {k} right rank {} != core {} left rank {}",
                    pair[0].rank_right,
                    k + 1,
                    pair[1].rank_left
                )));
            }
        }
        Ok(Self { shape, cores })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    /// Internal TT ranks `(R_1, ..., R_{K-1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(Core::rank_right)
            .collect()
    }

    /// Replace the parameters of core `k`, keeping its shape.
    pub fn set_core_data(&mut self, k: usize, data: &[f64]) -> Result<()> {
        let core = &mut self.cores[k];
        if data.len() != core.data.len() {
            return Err(TtError::DimensionMismatch(format!(
                "core {k} has {} parameters, got {}",
                core.data.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TtError::Numerical(format!("non-finite update for core {k}")));
        }
        core.data.copy_from_slice(data);
        Ok(())
    }

    /// Total parameter count.
    pub fn num_params(&self) -> usize {
        self.cores.iter().map(Core::len).sum()
    }

    /// `X[index]` as the product of core slices.
    pub fn element(&self, index: &[usize]) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.element_unchecked(index))
    }

    pub(crate) fn element_unchecked(&self, index: &[usize]) -> f64 {
        let mut v = vec![1.0];
        let mut next = Vec::new();
        for (core, &i) in self.cores.iter().zip(index) {
            row_times_slice(&v, core, i, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        v[0]
    }

    /// Row vector `G_1[j_1] ... G_{k-1}[j_{k-1}]` of length `R_{k-1}` for core `k`.
    pub(crate) fn left_vector(&self, index: &[usize], k: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        let mut next = Vec::new();
        for (core, &i) in self.cores[..k].iter().zip(index) {
            row_times_slice(out, core, i, &mut next);
            std::mem::swap(out, &mut next);
        }
    }

    /// Column vector `G_{k+1}[j_{k+1}] ... G_K[j_K]` of length `R_k` for core `k`.
    pub(crate) fn right_vector(&self, index: &[usize], k: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        let mut next = Vec::new();
        for (m, core) in self.cores.iter().enumerate().skip(k + 1).rev() {
            slice_times_col(core, index[m], out, &mut next);
            std::mem::swap(out, &mut next);
        }
    }

    /// Densify, refusing if the element count exceeds [`DEFAULT_DENSE_CAP`].
    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DenseTensor> {
        check_cap(self.shape.numel() as u128, cap)?;
        let full = self.contract_left(self.order());
        DenseTensor::new(self.shape.clone(), full.as_slice().to_vec())
    }

    /// Left interface `G_{<k}` for core `k` (0-based): an `I_{<k} x R_{k-1}`
    /// matrix whose row `(j_1, ..., j_{k-1})` is the product of the slices of
    /// the cores before `k`. `k = 0` gives the 1x1 matrix `(1)`; `k = K` gives
    /// the vectorized tensor as a column.
    pub fn left_interface(&self, k: usize) -> Result<Matrix> {
        if k > self.order() {
            return Err(TtError::InvalidParameter(format!(
                "left interface position {k} beyond order {}",
                self.order()
            )));
        }
        check_cap(self.shape.prefix(k) as u128, DEFAULT_DENSE_CAP)?;
        Ok(self.contract_left(k))
    }

    fn contract_left(&self, k: usize) -> Matrix {
        let mut acc = Matrix::from_element(1, 1, 1.0);
        for core in &self.cores[..k] {
            let (rows, rl, rr) = (acc.nrows(), core.rank_left, core.rank_right);
            let mut next = Matrix::zeros(rows * core.dim, rr);
            for row in 0..rows {
                for i in 0..core.dim {
                    let s = core.slice(i);
                    for a in 0..rl {
                        let va = acc[(row, a)];
                        if va == 0.0 {
                            continue;
                        }
                        for b in 0..rr {
                            next[(row * core.dim + i, b)] += va * s[a * rr + b];
                        }
                    }
                }
            }
            acc = next;
        }
        acc
    }

    /// Right interface `G_{k<}` for core `k` (0-based): an `R_k x I_{k<}`
    /// matrix whose column `(j_{k+1}, ..., j_K)` is the product of the slices of
    /// the cores after `k`. `k = K - 1` gives `(1)`.
    pub fn right_interface(&self, k: usize) -> Result<Matrix> {
        if k >= self.order() {
            return Err(TtError::InvalidParameter(format!(
                "right interface position {k} beyond last core {}",
                self.order() - 1
            )));
        }
        check_cap(self.shape.suffix(k + 1) as u128, DEFAULT_DENSE_CAP)?;
        let mut acc = Matrix::from_element(1, 1, 1.0);
        for core in self.cores[k + 1..].iter().rev() {
            let (cols, rl, rr) = (acc.ncols(), core.rank_left, core.rank_right);
            let mut next = Matrix::zeros(rl, core.dim * cols);
            for i in 0..core.dim {
                let s = core.slice(i);
                for a in 0..rl {
                    for b in 0..rr {
                        let g = s[a * rr + b];
                        if g == 0.0 {
                            continue;
                        }
                        for col in 0..cols {
                            next[(a, i * cols + col)] += g * acc[(b, col)];
                        }
                    }
                }
            }
            acc = next;
        }
        Ok(acc)
    }
}

impl Tensor for TtTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn element(&self, index: &[usize]) -> f64 {
        self.element_unchecked(index)
    }

    fn to_dense_capped(&self, cap: usize) -> Result<Cow<'_, DenseTensor>> {
        self.to_dense_with_cap(cap).map(Cow::Owned)
    }
}

/// TT tensor with i.i.d. standard normal cores, each rescaled to unit
/// Frobenius norm. Deterministic in `seed`.
pub fn random_tt(shape: &Shape, ranks: &[usize], seed: u64) -> Result<TtTensor> {
    random_tt_stream(shape, ranks, seed, rng::stream::TRUTH)
}

pub(crate) fn random_tt_stream(
    shape: &Shape,
    ranks: &[usize],
    seed: u64,
    stream: u64,
) -> Result<TtTensor> {
    let k_order = shape.order();
    if ranks.len() != k_order - 1 {
        return Err(TtError::InvalidParameter(format!(
            "expected {} TT ranks for order {k_order}, got {}",
            k_order - 1,
            ranks.len()
        )));
    }
    if ranks.contains(&0) {
        return Err(TtError::InvalidParameter("TT ranks must be positive".into()));
    }
    let mut rng = rng::seeded(seed, stream);
    let mut cores = Vec::with_capacity(k_order);
    for (k, &dim) in shape.dims().iter().enumerate() {
        let rl = if k == 0 { 1 } else { ranks[k - 1] };
        let rr = if k + 1 == k_order { 1 } else { ranks[k] };
        let mut data: Vec<f64> = (0..dim * rl * rr)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
        data.iter_mut().for_each(|v| *v /= norm);
        cores.push(Core::new(dim, rl, rr, data)?);
    }
    TtTensor::new(cores)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rank_one_example() -> TtTensor {
        TtTensor::new(vec![
            Core::new(2, 1, 1, vec![1.0, 2.0]).unwrap(),
            Core::new(2, 1, 1, vec![3.0, 4.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn rank_one_elements() {
        let tt = rank_one_example();
        assert_eq!(tt.element(&[0, 1]).unwrap(), 4.0);
        assert_eq!(tt.element(&[1, 0]).unwrap(), 6.0);
        assert!(tt.element(&[2, 0]).is_err());
        let dense = tt.to_dense().unwrap();
        assert_eq!(dense.values(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn zero_core_annihilates() {
        let shape = Shape::new(vec![3, 2, 4]).unwrap();
        let tt = random_tt(&shape, &[2, 3], 5).unwrap();
        let mut cores = tt.cores().to_vec();
        cores[1] = Core::zeros(2, 2, 3);
        let tt = TtTensor::new(cores).unwrap();
        assert!(tt.to_dense().unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_ones_cores() {
        let cores = (0..3).map(|_| Core::new(2, 1, 1, vec![1.0, 1.0]).unwrap()).collect();
        let tt = TtTensor::new(cores).unwrap();
        assert!(tt.to_dense().unwrap().values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn interfaces_of_rank_one_example() {
        let tt = rank_one_example();
        assert_eq!(tt.left_interface(0).unwrap(), Matrix::from_element(1, 1, 1.0));
        assert_eq!(tt.right_interface(1).unwrap(), Matrix::from_element(1, 1, 1.0));
        assert_eq!(tt.left_interface(1).unwrap(), Matrix::from_column_slice(2, 1, &[1.0, 2.0]));
        assert_eq!(tt.right_interface(0).unwrap(), Matrix::from_row_slice(1, 2, &[3.0, 4.0]));
        assert!(tt.left_interface(3).is_err());
        assert!(tt.right_interface(2).is_err());
    }

    #[test]
    fn rank_mismatch_rejected() {
        let bad = TtTensor::new(vec![Core::zeros(2, 1, 2), Core::zeros(2, 3, 1)]);
        assert!(bad.is_err());
        let bad_boundary = TtTensor::new(vec![Core::zeros(2, 2, 2), Core::zeros(2, 2, 1)]);
        assert!(bad_boundary.is_err());
    }

    #[test]
    fn random_tt_is_normalized_and_deterministic() {
        let shape = Shape::new(vec![4, 5, 3]).unwrap();
        let a = random_tt(&shape, &[2, 3], 11).unwrap();
        let b = random_tt(&shape, &[2, 3], 11).unwrap();
        assert_eq!(a, b);
        for core in a.cores() {
            assert!((core.frobenius_norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.ranks(), vec![2, 3]);
        assert!(random_tt(&shape, &[2], 1).is_err());
    }

    #[test]
    fn dense_cap_enforced() {
        let shape = Shape::new(vec![10, 10, 10]).unwrap();
        let tt = random_tt(&shape, &[1, 1], 0).unwrap();
        assert!(matches!(
            tt.to_dense_with_cap(999),
            Err(TtError::DenseCapExceeded { requested: 1000, .. })
        ));
    }
}
