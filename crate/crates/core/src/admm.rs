//! Convex TT completion by ADMM.
//!
//! Solves `min_X (1/2n) ||Y - 𝔛(X)||² + λ ||X||_{s,T}` with one split copy
//! `Z_k` per unfolding. The augmented Lagrangian used here is
//!
//! ```text
//! (1/2n)||Y - 𝔛x||² + Σ_k [ λ/(K-1) ||Z_k||_s + η/(2(K-1)) ||x - V_k(Z_k) + α_k||² ]
//! ```
//!
//! with scaled duals `α_k`, which yields the `prox_{λ/η}` step on each
//! unfolding and an `x`-update that is diagonal because `𝔛*𝔛` is a 0/1 mask.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtError};
use crate::observation::ObservationSet;
use crate::proximal::{prox_schatten, schatten1};
use crate::report::SolverReport;
use crate::tensor::{check_cap, row_major, DenseTensor, Shape, DEFAULT_DENSE_CAP};
use crate::Matrix;

/// Hyperparameters shared by both solvers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    /// Regularization weight `λ_n >= 0`.
    pub lambda: f64,
    /// ADMM step size `η > 0`. `None` balances the curvature of the data term
    /// against the consensus penalty: `1/n` for TT-ADMM, and a per-core trace
    /// ratio for the inner problems of TT-RALS.
    pub eta: Option<f64>,
    pub max_iter: usize,
    /// Relative-change stopping tolerance.
    pub tol_rel: f64,
    /// Scaled consensus-residual stopping tolerance.
    pub tol_feas: f64,
    pub seed: u64,
    /// Largest number of dense elements the solver may hold.
    pub dense_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eta: None,
            max_iter: 2000,
            tol_rel: 1e-6,
            tol_feas: 1e-5,
            seed: 0,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(TtError::InvalidParameter(format!("lambda {} must be >= 0", self.lambda)));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(TtError::InvalidParameter(format!("eta {eta} must be > 0")));
            }
        }
        if self.max_iter == 0 {
            return Err(TtError::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.tol_rel >= 0.0) || !(self.tol_feas >= 0.0) {
            return Err(TtError::InvalidParameter("tolerances must be >= 0".into()));
        }
        Ok(())
    }

    /// Step size actually used for `n` observations.
    pub fn eta_for(&self, n: usize) -> f64 {
        self.eta.unwrap_or(1.0 / n as f64)
    }
}

/// Iterates `(x, {Z_k}, {α_k})` of TT-ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    shape: Shape,
    /// Vectorized estimate, row-major.
    pub x: Vec<f64>,
    /// `Z_k`, the `I_{<=k} x I_{k<}` split copies for `k = 1..K-1`.
    pub z: Vec<Matrix>,
    /// Scaled duals, one flat vector per split.
    pub alpha: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl AdmmState {
    /// Start from the zero-filled observations: `x = 𝔛*(Y)`, `Z_k = Q_k(x)`,
    /// `α_k = 0`.
    pub fn init(obs: &ObservationSet) -> Result<Self> {
        let shape = obs.shape().clone();
        let mut x = vec![0.0; shape.numel()];
        for (idx, &y) in obs.indices().iter().zip(obs.values()) {
            x[shape.linear_index(idx)] = y;
        }
        let z = (1..shape.order()).map(|k| unfold_flat(&x, &shape, k)).collect();
        let alpha = vec![vec![0.0; x.len()]; shape.order() - 1];
        Ok(Self {
            shape,
            x,
            z,
            alpha,
            iteration: 0,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// `max_k ||x - V_k(Z_k)||`.
    pub fn consensus_residual(&self) -> f64 {
        self.z
            .iter()
            .map(|zk| {
                let v = row_major(zk);
                self.x.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn unfold_flat(x: &[f64], shape: &Shape, k: usize) -> Matrix {
    Matrix::from_row_slice(shape.prefix(k), shape.suffix(k), x)
}

/// Observations laid out on the full grid.
struct Grid {
    observed: Vec<bool>,
    y: Vec<f64>,
    n: usize,
}

impl Grid {
    fn new(obs: &ObservationSet) -> Self {
        let shape = obs.shape();
        let mut observed = vec![false; shape.numel()];
        let mut y = vec![0.0; shape.numel()];
        for (idx, &v) in obs.indices().iter().zip(obs.values()) {
            let lin = shape.linear_index(idx);
            observed[lin] = true;
            y[lin] = v;
        }
        Self {
            observed,
            y,
            n: obs.len(),
        }
    }
}

fn check_state(state: &AdmmState, obs: &ObservationSet) -> Result<()> {
    let k_order = obs.shape().order();
    if state.shape != *obs.shape()
        || state.z.len() != k_order - 1
        || state.alpha.len() != k_order - 1
        || state.x.len() != obs.shape().numel()
    {
        return Err(TtError::DimensionMismatch("ADMM state does not match observations".into()));
    }
    Ok(())
}

/// Exact minimizer of the augmented Lagrangian in `x`:
/// `(𝔛*𝔛/n + η) x = 𝔛*(Y)/n + η/(K-1) Σ_k (V_k(Z_k) - α_k)`, solved
/// entrywise.
pub fn admm_x_update(state: &AdmmState, obs: &ObservationSet, cfg: &SolverConfig) -> Result<Vec<f64>> {
    check_state(state, obs)?;
    let grid = Grid::new(obs);
    Ok(x_update(state, &grid, cfg.eta_for(obs.len())))
}

fn x_update(state: &AdmmState, grid: &Grid, eta: f64) -> Vec<f64> {
    let splits = state.z.len();
    let inv_n = 1.0 / grid.n as f64;
    let weight = eta / splits as f64;
    let mut rhs: Vec<f64> = grid.y.iter().map(|&y| y * inv_n).collect();
    for (zk, ak) in state.z.iter().zip(&state.alpha) {
        // Z_k is column-major; walk it in row-major order to match x.
        let cols = zk.ncols();
        for (lin, r) in rhs.iter_mut().enumerate() {
            *r += weight * (zk[(lin / cols, lin % cols)] - ak[lin]);
        }
    }
    rhs.iter()
        .zip(&grid.observed)
        .map(|(&r, &m)| r / (if m { inv_n } else { 0.0 } + eta))
        .collect()
}

/// `Z_k = prox_{λ/η}(Q_k(x + α_k))` for every split.
pub fn admm_z_update(state: &AdmmState, cfg: &SolverConfig, eta: f64) -> Result<Vec<Matrix>> {
    let threshold = cfg.lambda / eta;
    state
        .alpha
        .iter()
        .enumerate()
        .map(|(i, ak)| {
            let sum: Vec<f64> = state.x.iter().zip(ak).map(|(x, a)| x + a).collect();
            prox_schatten(&unfold_flat(&sum, &state.shape, i + 1), threshold)
        })
        .collect()
}

/// Dual ascent `α_k += x - V_k(Z_k)`.
pub fn admm_alpha_update(state: &AdmmState) -> Vec<Vec<f64>> {
    state
        .alpha
        .iter()
        .zip(&state.z)
        .map(|(ak, zk)| {
            let v = row_major(zk);
            ak.iter()
                .zip(&state.x)
                .zip(&v)
                .map(|((a, x), z)| a + x - z)
                .collect()
        })
        .collect()
}

/// `(1/2n) ||Y - 𝔛(x)||² + λ ||x||_{s,T}`.
pub fn admm_objective(x: &[f64], obs: &ObservationSet, lambda: f64) -> Result<f64> {
    let shape = obs.shape();
    let fit: f64 = obs
        .indices()
        .iter()
        .zip(obs.values())
        .map(|(idx, &y)| {
            let r = y - x[shape.linear_index(idx)];
            r * r
        })
        .sum();
    let mut reg = 0.0;
    if lambda > 0.0 {
        for k in 1..shape.order() {
            reg += schatten1(&unfold_flat(x, shape, k))?;
        }
        reg /= (shape.order() - 1) as f64;
    }
    Ok(fit / (2.0 * obs.len() as f64) + lambda * reg)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Dense elements held by the solver: `x` plus `K - 1` splits and duals.
pub fn admm_footprint(shape: &Shape) -> u128 {
    (2 * shape.order() as u128 - 1) * shape.numel() as u128
}

/// Run TT-ADMM to convergence (relative change and consensus residual both
/// below tolerance) or `max_iter`.
///
/// The dense iterate, `K - 1` split copies and `K - 1` duals are all held in
/// memory; the solve is refused with [`TtError::DenseCapExceeded`] when their
/// combined size `(2K - 1) prod_k I_k` exceeds `cfg.dense_cap`.
pub fn tt_admm_solve(obs: &ObservationSet, cfg: &SolverConfig) -> Result<(DenseTensor, SolverReport)> {
    cfg.validate()?;
    let shape = obs.shape().clone();
    check_cap(admm_footprint(&shape), cfg.dense_cap)?;

    let start = Instant::now();
    let eta = cfg.eta_for(obs.len());
    let grid = Grid::new(obs);
    let mut state = AdmmState::init(obs)?;
    let scale_floor = 1e-3 * l2(obs.values()).max(f64::MIN_POSITIVE);
    let mut report = SolverReport::new("tt-admm");

    for it in 1..=cfg.max_iter {
        let x_new = x_update(&state, &grid, eta);
        let change = state
            .x
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let rel_change = change / l2(&state.x).max(scale_floor);
        state.x = x_new;
        state.z = admm_z_update(&state, cfg, eta)?;
        state.alpha = admm_alpha_update(&state);
        state.iteration = it;

        let residual = state.consensus_residual() / l2(&state.x).max(scale_floor);
        let objective = admm_objective(&state.x, obs, cfg.lambda)?;
        if !objective.is_finite() {
            return Err(TtError::Numerical(format!("objective diverged at iteration {it}")));
        }
        report.objective.push(objective);
        report.primal_residual.push(residual);
        report.relative_change.push(rel_change);
        report.masked_rmse.push(masked_rmse(&state.x, &grid));
        if rel_change <= cfg.tol_rel && residual <= cfg.tol_feas {
            report.converged = true;
            break;
        }
    }
    report.iterations = state.iteration;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((DenseTensor::new(shape, state.x)?, report))
}

fn masked_rmse(x: &[f64], grid: &Grid) -> f64 {
    let ss: f64 = x
        .iter()
        .zip(&grid.y)
        .zip(&grid.observed)
        .filter(|(_, &m)| m)
        .map(|((a, b), _)| (a - b) * (a - b))
        .sum();
    (ss / grid.n as f64).sqrt()
}
