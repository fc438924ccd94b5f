//! Singular value decomposition, singular-value shrinkage and Schatten norms.

use nalgebra::SVD;

use crate::error::{Result, TtError};
use crate::tensor::DenseTensor;
use crate::Matrix;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

/// Relative cutoff below which singular values count as zero in rank counts.
pub const RANK_TOL: f64 = 1e-12;

/// Thin SVD `m = u diag(s) vt` with `s` sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (mut col, &s) in us.column_iter_mut().zip(&self.s) {
            col *= s;
        }
        us * &self.vt
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(TtError::Numerical("matrix has non-finite entries".into()));
    }
    Ok(())
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    check_finite(m)?;
    let dec = SVD::try_new(m.clone(), true, true, SVD_EPS, SVD_MAX_ITER).ok_or_else(|| {
        TtError::Numerical(format!("SVD of {}x{} did not converge", m.nrows(), m.ncols()))
    })?;
    Ok(SvdResult {
        u: dec.u.expect("u requested"),
        s: dec.singular_values.iter().copied().collect(),
        vt: dec.v_t.expect("v_t requested"),
    })
}

/// Singular values only, sorted descending.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let dec = SVD::try_new(m.clone(), false, false, SVD_EPS, SVD_MAX_ITER).ok_or_else(|| {
        TtError::Numerical(format!("SVD of {}x{} did not converge", m.nrows(), m.ncols()))
    })?;
    Ok(dec.singular_values.iter().copied().collect())
}

/// Singular-value shrinkage `U max(S - b, 0) V^T`, the proximal map of
/// `b ||.||_s`.
pub fn prox_schatten(w: &Matrix, b: f64) -> Result<Matrix> {
    if !(b >= 0.0) {
        return Err(TtError::InvalidParameter(format!("threshold {b} must be >= 0")));
    }
    if b == 0.0 {
        check_finite(w)?;
        return Ok(w.clone());
    }
    let mut dec = svd(w)?;
    let kept = dec.s.iter().take_while(|&&s| s > b).count();
    if kept == 0 {
        return Ok(Matrix::zeros(w.nrows(), w.ncols()));
    }
    dec.s.truncate(kept);
    dec.s.iter_mut().for_each(|s| *s -= b);
    let u = dec.u.columns(0, kept).into_owned();
    let vt = dec.vt.rows(0, kept).into_owned();
    Ok(SvdResult { u, s: dec.s, vt }.reconstruct())
}

/// Schatten-1 (nuclear) norm: the sum of singular values.
pub fn schatten1(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Schatten TT norm: the mean Schatten-1 norm over the `K - 1` unfoldings.
pub fn schatten_tt_norm(x: &DenseTensor) -> Result<f64> {
    let k_order = x.shape().order();
    let mut total = 0.0;
    for k in 1..k_order {
        total += schatten1(&x.unfold(k)?)?;
    }
    Ok(total / (k_order - 1) as f64)
}

/// Count of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let Some(&top) = s.first() else { return Ok(0) };
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > rel_tol * top).count())
}
