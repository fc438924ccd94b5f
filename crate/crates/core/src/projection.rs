//! Very sparse random projections of unfoldings.
//!
//! For a split `k`, two random tensors `Π_{k,1}` (`D_1 x I_1 x ... x I_k`) and
//! `Π_{k,2}` (`D_2 x I_{k+1} x ... x I_K`) have i.i.d. entries that are
//! `±sqrt(s/D)` with probability `1/(2s)` each and zero otherwise. The sketch
//! `P_k(X) = Π_{k,1} Q_k(X) Π_{k,2}^T` is a `D_1 x D_2` matrix whose Schatten-1
//! norm tracks that of the (possibly enormous) unfolding `Q_k(X)`.
//!
//! Only the nonzeros are stored. They are drawn by geometric skipping, which
//! has the same law as one Bernoulli trial per entry but costs time
//! proportional to the number of nonzeros.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::error::{Result, TtError};
use crate::proximal::schatten1;
use crate::rng;
use crate::tensor::{shape_mismatch, DenseTensor, Shape};
use crate::tt::{row_times_slice, slice_times_col, TtTensor};
use crate::Matrix;

/// Nonzeros of one side of a projection pair, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSide {
    /// Number of tensor modes each nonzero indexes.
    modes: usize,
    rows: Vec<u32>,
    negative: Vec<bool>,
    index: Vec<u32>,
    magnitude: f64,
    sparsity: f64,
}

impl SparseSide {
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    /// Entry magnitude `sqrt(s / D)`.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn sparsity(&self) -> f64 {
        self.sparsity
    }

    /// `(row, signed value, multi-index)` of every nonzero.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, &[u32])> + '_ {
        let m = self.modes;
        (0..self.rows.len()).map(move |t| {
            let v = if self.negative[t] { -self.magnitude } else { self.magnitude };
            (self.rows[t] as usize, v, &self.index[t * m..(t + 1) * m])
        })
    }

    fn sample<R: Rng>(
        rng: &mut R,
        rows: usize,
        dims: &[usize],
        sparsity: f64,
    ) -> Result<Self> {
        let inner: u128 = dims.iter().map(|&d| d as u128).product();
        let total = rows as u128 * inner;
        let skip = Geometric::new(1.0 / sparsity)
            .map_err(|e| TtError::InvalidParameter(format!("sparsity {sparsity}: {e}")))?;
        let mut side = Self {
            modes: dims.len(),
            rows: Vec::new(),
            negative: Vec::new(),
            index: Vec::new(),
            magnitude: (sparsity / rows as f64).sqrt(),
            sparsity,
        };
        let mut pos: u128 = 0;
        loop {
            pos += skip.sample(rng) as u128;
            if pos >= total {
                break;
            }
            let mut rem = pos % inner;
            let start = side.index.len();
            side.index.resize(start + dims.len(), 0);
            for (slot, &d) in side.index[start..].iter_mut().zip(dims).rev() {
                *slot = (rem % d as u128) as u32;
                rem /= d as u128;
            }
            side.rows.push((pos / inner) as u32);
            side.negative.push(rng.random_bool(0.5));
            pos += 1;
        }
        Ok(side)
    }

    /// `rows x R` accumulation of `value * chain(index)` over the nonzeros.
    fn accumulate<F>(&self, out_rows: usize, width: usize, mut chain: F) -> Matrix
    where
        F: FnMut(&[u32], &mut Vec<f64>),
    {
        let mut acc = Matrix::zeros(out_rows, width);
        let mut v = Vec::with_capacity(width);
        for (row, val, idx) in self.iter() {
            chain(idx, &mut v);
            for (c, &x) in v.iter().enumerate() {
                acc[(row, c)] += val * x;
            }
        }
        acc
    }
}

/// The pair `(Π_{k,1}, Π_{k,2})` defining the sketch `P_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProjectionPair {
    shape: Shape,
    k: usize,
    d1: usize,
    d2: usize,
    left: SparseSide,
    right: SparseSide,
}

impl SparseProjectionPair {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Split position: the number of leading modes on the row side.
    pub fn split(&self) -> usize {
        self.k
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn left(&self) -> &SparseSide {
        &self.left
    }

    pub fn right(&self) -> &SparseSide {
        &self.right
    }

    /// Heap bytes held by the stored nonzeros.
    pub fn storage_bytes(&self) -> usize {
        [&self.left, &self.right]
            .iter()
            .map(|s| s.rows.len() * 5 + s.index.len() * 4)
            .sum()
    }

    /// Row vectors `A = Π_{k,1}`-weighted sum of left chains, `D_1 x R_k`.
    pub(crate) fn left_factor(&self, tt: &TtTensor) -> Matrix {
        let cores = &tt.cores()[..self.k];
        let width = cores[self.k - 1].rank_right();
        self.left.accumulate(self.d1, width, |idx, out| left_chain(cores, idx, out))
    }

    /// Column vectors from the right side, returned transposed as `D_2 x R_k`.
    pub(crate) fn right_factor(&self, tt: &TtTensor) -> Matrix {
        let cores = &tt.cores()[self.k..];
        let width = cores[0].rank_left();
        self.right.accumulate(self.d2, width, |idx, out| right_chain(cores, idx, out))
    }
}

/// `G_1[j_1] ... G_m[j_m]` for the given leading cores.
pub(crate) fn left_chain(cores: &[crate::tt::Core], idx: &[u32], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    let mut next = Vec::new();
    for (core, &i) in cores.iter().zip(idx) {
        row_times_slice(out, core, i as usize, &mut next);
        std::mem::swap(out, &mut next);
    }
}

/// `G_a[j_a] ... G_K[j_K]` for the given trailing cores, as a column vector.
pub(crate) fn right_chain(cores: &[crate::tt::Core], idx: &[u32], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    let mut next = Vec::new();
    for (core, &i) in cores.iter().zip(idx).rev() {
        slice_times_col(core, i as usize, out, &mut next);
        std::mem::swap(out, &mut next);
    }
}

fn check_params(shape: &Shape, k: usize, d1: usize, d2: usize, sparsities: &[f64]) -> Result<()> {
    if k == 0 || k >= shape.order() {
        return Err(TtError::InvalidParameter(format!(
            "projection split {k} outside 1..={}",
            shape.order() - 1
        )));
    }
    if d1 == 0 || d2 == 0 || d1 > u32::MAX as usize || d2 > u32::MAX as usize {
        return Err(TtError::InvalidParameter(format!(
            "projection dimensions ({d1}, {d2}) must be positive"
        )));
    }
    if shape.dims().iter().any(|&d| d > u32::MAX as usize) {
        return Err(TtError::InvalidShape("mode sizes above u32::MAX".into()));
    }
    for &s in sparsities {
        if !(s > 1.0) || !s.is_finite() {
            return Err(TtError::InvalidParameter(format!("sparsity {s} must be > 1")));
        }
    }
    Ok(())
}

/// Sample `(Π_{k,1}, Π_{k,2})` with common sparsity `s > 1`.
pub fn sample_projection(
    shape: &Shape,
    k: usize,
    d1: usize,
    d2: usize,
    s: f64,
    seed: u64,
) -> Result<SparseProjectionPair> {
    sample_projection_with_sparsity(shape, k, d1, d2, s, s, seed)
}

/// Like [`sample_projection`] but with a separate sparsity for each side.
pub fn sample_projection_with_sparsity(
    shape: &Shape,
    k: usize,
    d1: usize,
    d2: usize,
    s_left: f64,
    s_right: f64,
    seed: u64,
) -> Result<SparseProjectionPair> {
    check_params(shape, k, d1, d2, &[s_left, s_right])?;
    let mut rng = rng::seeded(seed, rng::stream::PROJECTION);
    let left = SparseSide::sample(&mut rng, d1, &shape.dims()[..k], s_left)?;
    let right = SparseSide::sample(&mut rng, d2, &shape.dims()[k..], s_right)?;
    Ok(SparseProjectionPair {
        shape: shape.clone(),
        k,
        d1,
        d2,
        left,
        right,
    })
}

/// Sample a pair whose sides each carry about `nnz` nonzeros in expectation.
/// Each side uses sparsity `max(entries / nnz, min_sparsity)`, so the cost of
/// sketching no longer grows with the size of the unfolding.
pub fn sample_projection_budget(
    shape: &Shape,
    k: usize,
    d1: usize,
    d2: usize,
    nnz: usize,
    min_sparsity: f64,
    seed: u64,
) -> Result<SparseProjectionPair> {
    if nnz == 0 {
        return Err(TtError::InvalidParameter("nonzero budget must be positive".into()));
    }
    let side_s = |rows: usize, modes: &[usize]| {
        let entries = rows as f64 * modes.iter().map(|&d| d as f64).product::<f64>();
        (entries / nnz as f64).max(min_sparsity)
    };
    let s_left = side_s(d1, &shape.dims()[..k.min(shape.order())]);
    let s_right = side_s(d2, &shape.dims()[k.min(shape.order())..]);
    sample_projection_with_sparsity(shape, k, d1, d2, s_left, s_right, seed)
}

/// `P_k(X)` for a dense tensor, iterating only the stored nonzeros.
pub fn project_dense(p: &SparseProjectionPair, x: &DenseTensor) -> Result<Matrix> {
    if x.shape() != &p.shape {
        return Err(shape_mismatch(x.shape(), &p.shape));
    }
    let q = x.unfold(p.k)?;
    let (lshape, rshape) = (&p.shape.dims()[..p.k], &p.shape.dims()[p.k..]);
    // Y = Π_{k,1} Q_k(X), then P = Y Π_{k,2}^T.
    let mut y = Matrix::zeros(p.d1, q.ncols());
    for (row, val, idx) in p.left.iter() {
        let lin = linearize(idx, lshape);
        for c in 0..q.ncols() {
            y[(row, c)] += val * q[(lin, c)];
        }
    }
    let mut out = Matrix::zeros(p.d1, p.d2);
    for (row, val, idx) in p.right.iter() {
        let lin = linearize(idx, rshape);
        let src = y.column(lin);
        let mut dst = out.column_mut(row);
        dst.axpy(val, &src, 1.0);
    }
    Ok(out)
}

/// `P_k(X(𝒢))` computed in TT format: `A B^T`, where row `d_1` of `A` sums the
/// left chains `G_1[j_1]...G_k[j_k]` of the nonzeros in that row and `B` does
/// the same with the right chains.
pub fn project_tt(p: &SparseProjectionPair, tt: &TtTensor) -> Result<Matrix> {
    if tt.shape() != &p.shape {
        return Err(shape_mismatch(tt.shape(), &p.shape));
    }
    Ok(p.left_factor(tt) * p.right_factor(tt).transpose())
}

fn linearize(idx: &[u32], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i as usize)
}

/// `max{R, 4 (ln(6R) + ln(1/ε)) / ε²}`, rounded up: the sketch size at which
/// the Schatten-norm sandwich is guaranteed with probability `1 - ε`.
pub fn theorem1_dimension_threshold(rank: usize, eps: f64) -> usize {
    let r = rank as f64;
    let bound = 4.0 * ((6.0 * r).ln() + (1.0 / eps).ln()) / (eps * eps);
    r.max(bound).ceil() as usize
}

/// Outcome of an empirical check of the Schatten-norm sandwich
/// `(1-ε)/R_k ||Q_k(X)||_s <= ||P_k(X)||_s <= (1+ε) ||Q_k(X)||_s`.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub pairs: usize,
    pub satisfied: usize,
    pub upper_satisfied: usize,
    pub fraction: f64,
    pub upper_fraction: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Per-split sketch-size threshold from the true ranks.
    pub thresholds: Vec<usize>,
    pub ratios: Vec<f64>,
}

/// Draw `trials` random TT tensors and projections (`D_1 = D_2 = d`) and count
/// the `(split, trial)` pairs for which the sandwich holds.
pub fn verify_theorem1(
    shape: &Shape,
    ranks: &[usize],
    d: usize,
    s: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<SandwichReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TtError::InvalidParameter(format!("epsilon {eps} outside (0, 1)")));
    }
    if let Some(&r) = ranks.iter().find(|&&r| r > d) {
        return Err(TtError::InvalidParameter(format!("sketch size {d} below rank {r}")));
    }
    let k_order = shape.order();
    let mut ratios = Vec::with_capacity(trials * (k_order - 1));
    let (mut satisfied, mut upper) = (0, 0);
    for trial in 0..trials {
        let trial_seed = rng::derive_seed(seed, trial as u64);
        let tt = crate::tt::random_tt(shape, ranks, trial_seed)?;
        let dense = tt.to_dense()?;
        for k in 1..k_order {
            let q_norm = schatten1(&dense.unfold(k)?)?;
            let p = sample_projection(shape, k, d, d, s, rng::derive_seed(trial_seed, k as u64))?;
            let p_norm = schatten1(&project_tt(&p, &tt)?)?;
            let rk = ranks[k - 1] as f64;
            let hi = p_norm <= (1.0 + eps) * q_norm;
            let lo = (1.0 - eps) / rk * q_norm <= p_norm;
            upper += hi as usize;
            satisfied += (hi && lo) as usize;
            ratios.push(p_norm / q_norm);
        }
    }
    let pairs = ratios.len();
    Ok(SandwichReport {
        pairs,
        satisfied,
        upper_satisfied: upper,
        fraction: satisfied as f64 / pairs as f64,
        upper_fraction: upper as f64 / pairs as f64,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        thresholds: ranks.iter().map(|&r| theorem1_dimension_threshold(r, eps)).collect(),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{random_tt, Core};

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    /// Triple loop over every entry of both projection tensors and the tensor.
    fn naive_projection(p: &SparseProjectionPair, x: &DenseTensor) -> Matrix {
        let dims = p.shape().dims();
        let k = p.split();
        let lshape = Shape::new([&[p.d1()][..], &dims[..k]].concat()).unwrap();
        let rshape = Shape::new([&[p.d2()][..], &dims[k..]].concat()).unwrap();
        let mut left = vec![0.0; lshape.numel()];
        for (row, v, idx) in p.left().iter() {
            let full: Vec<usize> = std::iter::once(row).chain(idx.iter().map(|&i| i as usize)).collect();
            left[lshape.linear_index(&full)] = v;
        }
        let mut right = vec![0.0; rshape.numel()];
        for (row, v, idx) in p.right().iter() {
            let full: Vec<usize> = std::iter::once(row).chain(idx.iter().map(|&i| i as usize)).collect();
            right[rshape.linear_index(&full)] = v;
        }
        let (nl, nr) = (x.shape().prefix(k), x.shape().suffix(k));
        let mut out = Matrix::zeros(p.d1(), p.d2());
        for a in 0..p.d1() {
            for b in 0..p.d2() {
                let mut acc = 0.0;
                for l in 0..nl {
                    for r in 0..nr {
                        acc += left[a * nl + l] * x.values()[l * nr + r] * right[b * nr + r];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        out
    }

    #[test]
    fn magnitudes_and_determinism() {
        let s = shape(&[4, 3, 5]);
        let p = sample_projection(&s, 1, 6, 7, 3.0, 9).unwrap();
        assert_eq!(p, sample_projection(&s, 1, 6, 7, 3.0, 9).unwrap());
        for (_, v, idx) in p.left().iter() {
            assert_eq!(v.abs(), (3.0f64 / 6.0).sqrt());
            assert!((idx[0] as usize) < 4);
        }
        for (_, v, idx) in p.right().iter() {
            assert_eq!(v.abs(), (3.0f64 / 7.0).sqrt());
            assert!((idx[0] as usize) < 3 && (idx[1] as usize) < 5);
        }
    }

    #[test]
    fn invalid_parameters() {
        let s = shape(&[4, 3]);
        assert!(sample_projection(&s, 1, 2, 2, 1.0, 0).is_err());
        assert!(sample_projection(&s, 0, 2, 2, 3.0, 0).is_err());
        assert!(sample_projection(&s, 2, 2, 2, 3.0, 0).is_err());
        assert!(sample_projection(&s, 1, 0, 2, 3.0, 0).is_err());
    }

    #[test]
    fn nonzero_fraction_matches_sparsity() {
        // 100 x 1000 = 10^5 potential entries per side.
        let s = shape(&[1000, 1000]);
        let p = sample_projection(&s, 1, 100, 100, 4.0, 17).unwrap();
        let frac = p.left().nnz() as f64 / 1e5;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
        let frac = p.right().nnz() as f64 / 1e5;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
    }

    #[test]
    fn empty_projection_gives_zero_sketch() {
        let s = shape(&[2, 2]);
        let p = sample_projection(&s, 1, 1, 1, 1e12, 0).unwrap();
        assert_eq!(p.left().nnz() + p.right().nnz(), 0);
        let tt = random_tt(&s, &[2], 0).unwrap();
        assert_eq!(project_tt(&p, &tt).unwrap(), Matrix::zeros(1, 1));
    }

    #[test]
    fn dense_projection_matches_naive_sum() {
        for seed in 0..5 {
            let s = shape(&[3, 2, 4]);
            let tt = random_tt(&s, &[2, 3], seed).unwrap();
            let x = tt.to_dense().unwrap();
            for k in 1..3 {
                let p = sample_projection(&s, k, 4, 5, 2.0, seed * 10 + k as u64).unwrap();
                let fast = project_dense(&p, &x).unwrap();
                let slow = naive_projection(&p, &x);
                assert!((fast - &slow).norm() <= 1e-10 * slow.norm().max(1.0));
            }
        }
    }

    #[test]
    fn zero_tensor_projects_to_zero() {
        let s = shape(&[3, 3]);
        let p = sample_projection(&s, 1, 4, 4, 2.0, 3).unwrap();
        assert_eq!(project_dense(&p, &DenseTensor::zeros(s)).unwrap(), Matrix::zeros(4, 4));
    }

    #[test]
    fn single_nonzero_projection_closed_form() {
        let s = shape(&[2, 3]);
        let tt = TtTensor::new(vec![
            Core::new(2, 1, 1, vec![1.5, -2.0]).unwrap(),
            Core::new(3, 1, 1, vec![0.5, 4.0, 3.0]).unwrap(),
        ])
        .unwrap();
        let side = |modes, idx: u32, mag: f64| SparseSide {
            modes,
            rows: vec![0],
            negative: vec![false],
            index: vec![idx],
            magnitude: mag,
            sparsity: 2.0,
        };
        let p = SparseProjectionPair {
            shape: s.clone(),
            k: 1,
            d1: 2,
            d2: 3,
            left: side(1, 1, (2.0f64 / 2.0).sqrt()),
            right: side(1, 2, (2.0f64 / 3.0).sqrt()),
        };
        let out = project_tt(&p, &tt).unwrap();
        let expect = (2.0f64 / 2.0).sqrt() * (2.0f64 / 3.0).sqrt() * (-2.0 * 3.0);
        assert!((out[(0, 0)] - expect).abs() < 1e-14);
        assert_eq!(out.iter().filter(|&&v| v != 0.0).count(), 1);
        let dense = project_dense(&p, &tt.to_dense().unwrap()).unwrap();
        assert!((dense - out).norm() < 1e-14);
    }

    #[test]
    fn budgeted_sparsity_caps_nonzeros() {
        let s = shape(&[10, 10, 10, 10, 10, 10]);
        let p = sample_projection_budget(&s, 5, 10, 10, 200, 3.0, 1).unwrap();
        assert!(p.left().nnz() < 400, "{}", p.left().nnz());
        assert_eq!(p.right().sparsity(), 3.0);
    }

    #[test]
    fn threshold_formula() {
        // max{3, 16 (ln 18 + ln 2)} = 57.34 -> 58
        assert_eq!(theorem1_dimension_threshold(3, 0.5), 58);
        assert_eq!(theorem1_dimension_threshold(1000, 0.5), 1000);
    }

    #[test]
    fn sandwich_verifier_runs() {
        let s = shape(&[4, 4, 4]);
        let rep = verify_theorem1(&s, &[2, 2], 32, 3.0, 0.5, 5, 1).unwrap();
        assert_eq!(rep.pairs, 10);
        assert!(rep.min_ratio > 0.0 && rep.max_ratio.is_finite());
        assert!(verify_theorem1(&s, &[2, 2], 1, 3.0, 0.5, 5, 1).is_err());
    }
}
