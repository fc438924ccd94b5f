//! Observation model `y_i = X*[j(i)] + eps_i`.
//!
//! The rearranging operator `𝔛` picks the entries at the observed index set
//! `S`; its adjoint `𝔛*` scatters a vector back into an otherwise zero tensor.

use std::collections::HashSet;

use rand_distr::{Distribution, Normal};

use crate::error::{Result, TtError};
use crate::rng;
use crate::tensor::{check_cap, DenseTensor, Shape, Tensor, DEFAULT_DENSE_CAP};

/// Observed entries: distinct multi-indices and their (noisy) values.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    shape: Shape,
    indices: Vec<Vec<usize>>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(shape: Shape, indices: Vec<Vec<usize>>, values: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(TtError::InvalidParameter("observation set is empty".into()));
        }
        if indices.len() != values.len() {
            return Err(TtError::DimensionMismatch(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        check_indices(&shape, &indices)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TtError::Numerical("non-finite observation".into()));
        }
        Ok(Self {
            shape,
            indices,
            values,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of observations `n`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Root mean squared difference between `x` and the observed values.
    pub fn rmse<T: Tensor + ?Sized>(&self, x: &T) -> Result<f64> {
        let pred = apply_mask(x, &self.indices)?;
        Ok(rms_diff(&pred, &self.values))
    }
}

pub(crate) fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len().max(1) as f64).sqrt()
}

/// Validate that every index is in range and no index repeats.
fn check_indices(shape: &Shape, indices: &[Vec<usize>]) -> Result<()> {
    let mut seen = HashSet::with_capacity(indices.len());
    for idx in indices {
        shape.check_index(idx)?;
        if !seen.insert(shape.linear_index(idx)) {
            return Err(TtError::InvalidParameter(format!("duplicate observed index {idx:?}")));
        }
    }
    Ok(())
}

fn check_in_range(shape: &Shape, indices: &[Vec<usize>]) -> Result<()> {
    indices.iter().try_for_each(|idx| shape.check_index(idx))
}

/// `n` distinct indices drawn uniformly without replacement, sorted row-major.
pub fn sample_mask(shape: &Shape, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let total = shape.numel();
    if n == 0 || n > total {
        return Err(TtError::InvalidParameter(format!(
            "cannot sample {n} of {total} entries"
        )));
    }
    let mut rng = rng::seeded(seed, rng::stream::MASK);
    let mut picked = rand::seq::index::sample(&mut rng, total, n).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|lin| {
            let mut idx = vec![0; shape.order()];
            shape.unravel(lin, &mut idx);
            idx
        })
        .collect())
}

/// `𝔛(X)`: entries of `x` at the given indices. TT inputs are evaluated
/// entrywise without densification.
pub fn apply_mask<T: Tensor + ?Sized>(x: &T, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
    check_in_range(x.shape(), indices)?;
    Ok(indices.iter().map(|idx| x.element(idx)).collect())
}

/// `𝔛*(v)`: a tensor holding `v_i` at `j(i)` and zero elsewhere.
pub fn adjoint_mask(v: &[f64], indices: &[Vec<usize>], shape: &Shape) -> Result<DenseTensor> {
    if v.len() != indices.len() {
        return Err(TtError::DimensionMismatch(format!(
            "{} values for {} indices",
            v.len(),
            indices.len()
        )));
    }
    check_in_range(shape, indices)?;
    check_cap(shape.numel() as u128, DEFAULT_DENSE_CAP)?;
    let mut values = vec![0.0; shape.numel()];
    for (idx, &vi) in indices.iter().zip(v) {
        values[shape.linear_index(idx)] = vi;
    }
    DenseTensor::new(shape.clone(), values)
}

/// Observe `x_true` at `indices` with i.i.d. Gaussian noise of standard
/// deviation `sigma`.
pub fn observe<T: Tensor + ?Sized>(
    x_true: &T,
    indices: Vec<Vec<usize>>,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(TtError::InvalidParameter(format!("noise level {sigma} must be >= 0")));
    }
    let mut values = apply_mask(x_true, &indices)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma validated");
        let mut rng = rng::seeded(seed, rng::stream::NOISE);
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    ObservationSet::new(x_true.shape().clone(), indices, values)
}

/// `||𝔛*(noise)||_inf / n`, the smallest regularization level covered by the
/// error bounds.
pub fn lambda_floor(noise: &[f64], indices: &[Vec<usize>], shape: &Shape) -> Result<f64> {
    if noise.len() != indices.len() || noise.is_empty() {
        return Err(TtError::DimensionMismatch(format!(
            "{} noise values for {} indices",
            noise.len(),
            indices.len()
        )));
    }
    check_in_range(shape, indices)?;
    let max = noise.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(max / noise.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::random_tt;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn full_mask_is_every_index_in_order() {
        let s = shape(&[2, 3]);
        let mask = sample_mask(&s, 6, 3).unwrap();
        let lin: Vec<usize> = mask.iter().map(|i| s.linear_index(i)).collect();
        assert_eq!(lin, (0..6).collect::<Vec<_>>());
        let x = DenseTensor::new(s, (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(apply_mask(&x, &mask).unwrap(), x.values());
    }

    #[test]
    fn mask_bounds() {
        let s = shape(&[2, 2]);
        assert_eq!(sample_mask(&s, 1, 0).unwrap().len(), 1);
        assert!(sample_mask(&s, 0, 0).is_err());
        assert!(sample_mask(&s, 5, 0).is_err());
        assert_eq!(sample_mask(&s, 3, 9).unwrap(), sample_mask(&s, 3, 9).unwrap());
    }

    #[test]
    fn adjoint_edge_cases() {
        let s = shape(&[2, 2]);
        let full = sample_mask(&s, 4, 0).unwrap();
        let t = adjoint_mask(&[1.0, 2.0, 3.0, 4.0], &full, &s).unwrap();
        assert_eq!(t.values(), &[1.0, 2.0, 3.0, 4.0]);
        let z = adjoint_mask(&[0.0; 4], &full, &s).unwrap();
        assert_eq!(z, DenseTensor::zeros(s.clone()));
        assert!(adjoint_mask(&[1.0], &full, &s).is_err());
    }

    #[test]
    fn zero_tensor_masks_to_zero() {
        let s = shape(&[3, 3]);
        let mask = sample_mask(&s, 4, 1).unwrap();
        let v = apply_mask(&DenseTensor::zeros(s), &mask).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tt_and_dense_masks_agree() {
        let s = shape(&[3, 4, 2]);
        let tt = random_tt(&s, &[2, 2], 6).unwrap();
        let mask = sample_mask(&s, 10, 2).unwrap();
        let a = apply_mask(&tt, &mask).unwrap();
        let b = apply_mask(&tt.to_dense().unwrap(), &mask).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let s = shape(&[3, 3, 3]);
        let tt = random_tt(&s, &[2, 2], 1).unwrap();
        let mask = sample_mask(&s, 9, 4).unwrap();
        let obs = observe(&tt, mask.clone(), 0.0, 5).unwrap();
        assert_eq!(obs.values(), apply_mask(&tt, &mask).unwrap().as_slice());
        assert!(observe(&tt, mask, -1.0, 5).is_err());
    }

    #[test]
    fn observation_set_validation() {
        let s = shape(&[2, 2]);
        assert!(ObservationSet::new(s.clone(), vec![], vec![]).is_err());
        assert!(ObservationSet::new(s.clone(), vec![vec![0, 0], vec![0, 0]], vec![1.0, 2.0]).is_err());
        assert!(ObservationSet::new(s.clone(), vec![vec![0, 2]], vec![1.0]).is_err());
        assert!(ObservationSet::new(s, vec![vec![0, 1]], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn lambda_floor_examples() {
        let s = shape(&[2, 2]);
        let idx = vec![vec![0, 0], vec![0, 1], vec![1, 0]];
        assert_eq!(lambda_floor(&[0.0; 3], &idx, &s).unwrap(), 0.0);
        assert_eq!(lambda_floor(&[1.0, -3.0, 2.0], &idx, &s).unwrap(), 1.0);
    }
}
