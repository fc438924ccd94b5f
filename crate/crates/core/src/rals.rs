//! Randomized alternating least squares (TT-RALS).
//!
//! The TT cores are updated one at a time. With every other core fixed the
//! tensor is linear in the free core `g_k`, so both the masked data fit and the
//! sketches `P_{k'}(X)` become linear maps of `g_k`:
//!
//! * `Ω` (`n x I_k R_{k-1} R_k`) with `Ω g_k = 𝔛(X(𝒢))`,
//! * `Γ_{k'}` (`D_1 D_2 x I_k R_{k-1} R_k`) with `Γ_{k'} g_k = vec P_{k'}(X(𝒢))`.
//!
//! The convex per-core problem
//! `(1/2n)||Y - Ω g||² + λ/(K-1) Σ_{k'} ||mat(Γ_{k'} g)||_s`
//! is solved by a short inner ADMM on splits `W_{k'} = mat(Γ_{k'} g)`. Since
//! `Γ_{k'} g_k` is the same sketch whichever core is free, the splits and
//! their duals carry over from one core update to the next.
//!
//! Sketch matrices are vectorized row-major (`d_1 D_2 + d_2`); core parameters
//! follow [`Core::data`](crate::tt::Core::data).

use std::time::Instant;

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::admm::SolverConfig;
use crate::error::{Result, TtError};
use crate::observation::{rms_diff, ObservationSet};
use crate::projection::{
    left_chain, project_tt, right_chain, sample_projection_budget, sample_projection_with_sparsity,
    SparseProjectionPair,
};
use crate::proximal::{prox_schatten, schatten1, svd, RANK_TOL};
use crate::report::SolverReport;
use crate::rng;
use crate::tensor::{DenseTensor, Shape};
use crate::tt::{random_tt_stream, TtTensor};
use crate::Matrix;

/// How dense the projection tensors are.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub enum Sparsity {
    /// Every entry is nonzero with probability `1/s`.
    Fixed(f64),
    /// Each side gets about `nnz` nonzeros; the sparsity is derived per side
    /// and never drops below `min`.
    Budget { nnz: usize, min: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
pub enum SweepOrder {
    #[default]
    Ascending,
    Descending,
}

/// TT-RALS hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RalsConfig {
    #[serde(flatten)]
    pub solver: SolverConfig,
    pub d1: usize,
    pub d2: usize,
    pub sparsity: Sparsity,
    /// TT rank used for estimation; capped per split by the unfolding size.
    pub max_rank: usize,
    pub outer_sweeps: usize,
    pub inner_iters: usize,
    pub sweep_order: SweepOrder,
    /// Independent random initializations; the one with the lowest final
    /// objective is returned.
    pub restarts: usize,
}

impl Default for RalsConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            d1: 10,
            d2: 10,
            sparsity: Sparsity::Fixed(20.0),
            max_rank: 10,
            outer_sweeps: 20,
            inner_iters: 20,
            sweep_order: SweepOrder::Ascending,
            restarts: 1,
        }
    }
}

impl RalsConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.d1 == 0 || self.d2 == 0 {
            return Err(TtError::InvalidParameter("projection sizes must be positive".into()));
        }
        if self.max_rank == 0 {
            return Err(TtError::InvalidParameter("estimation rank must be positive".into()));
        }
        if self.outer_sweeps == 0 || self.inner_iters == 0 || self.restarts == 0 {
            return Err(TtError::InvalidParameter(
                "sweeps, inner iterations and restarts must be positive".into(),
            ));
        }
        match self.sparsity {
            Sparsity::Fixed(s) if !(s > 1.0) => {
                Err(TtError::InvalidParameter(format!("sparsity {s} must be > 1")))
            }
            Sparsity::Budget { nnz: 0, .. } => {
                Err(TtError::InvalidParameter("nonzero budget must be positive".into()))
            }
            Sparsity::Budget { min, .. } if !(min > 1.0) => {
                Err(TtError::InvalidParameter(format!("minimum sparsity {min} must be > 1")))
            }
            _ => Ok(()),
        }
    }

    /// Estimation ranks for a shape: `min(R, I_{<=k}, I_{k<})` per split.
    pub fn ranks_for(&self, shape: &Shape) -> Vec<usize> {
        (1..shape.order())
            .map(|k| {
                self.max_rank.min(shape.prefix(k)).min(shape.suffix(k))
            })
            .collect()
    }
}

/// Solver state `(𝒢, {Π}, {W_{k'}}, {β_{k'}})`.
#[derive(Debug, Clone)]
pub struct RalsState {
    pub tt: TtTensor,
    /// One projection pair per split `k' = 1..K-1`, fixed for the whole solve.
    pub projections: Vec<SparseProjectionPair>,
    /// `D_1 x D_2` split copies of the sketches.
    pub w: Vec<Matrix>,
    /// Scaled duals, row-major `D_1 D_2` vectors.
    pub beta: Vec<Vec<f64>>,
    /// Penalty the duals are currently scaled by.
    pub eta: Option<f64>,
    pub sweep: usize,
}

impl RalsState {
    /// Random cores at the estimation ranks, freshly sampled projections and
    /// `W_{k'} = P_{k'}(X)`, `β = 0`.
    pub fn init(shape: &Shape, cfg: &RalsConfig, seed: u64) -> Result<Self> {
        let tt = random_tt_stream(shape, &cfg.ranks_for(shape), seed, rng::stream::INIT)?;
        let projections = sample_projections(shape, cfg, seed)?;
        Self::with_parts(tt, projections)
    }

    pub fn with_parts(tt: TtTensor, projections: Vec<SparseProjectionPair>) -> Result<Self> {
        if projections.len() + 1 != tt.order() {
            return Err(TtError::DimensionMismatch(format!(
                "{} projections for order {}",
                projections.len(),
                tt.order()
            )));
        }
        let w = projections
            .iter()
            .map(|p| project_tt(p, &tt))
            .collect::<Result<Vec<_>>>()?;
        let beta = w.iter().map(|m| vec![0.0; m.len()]).collect();
        Ok(Self {
            tt,
            projections,
            w,
            beta,
            eta: None,
            sweep: 0,
        })
    }
}

/// Projection pairs for every split, seeded from `seed`.
pub fn sample_projections(shape: &Shape, cfg: &RalsConfig, seed: u64) -> Result<Vec<SparseProjectionPair>> {
    (1..shape.order())
        .map(|k| {
            let s = rng::derive_seed(seed, 1000 + k as u64);
            match cfg.sparsity {
                Sparsity::Fixed(sp) => sample_projection_with_sparsity(shape, k, cfg.d1, cfg.d2, sp, sp, s),
                Sparsity::Budget { nnz, min } => sample_projection_budget(shape, k, cfg.d1, cfg.d2, nnz, min, s),
            }
        })
        .collect()
}

/// Rows of `Ω` in factored form: row `i` is `vec(l_i r_i^T)` placed in the
/// block of slice `slot_i`.
pub(crate) struct OmegaRows {
    slots: Vec<usize>,
    left: Vec<f64>,
    right: Vec<f64>,
    rank_left: usize,
    rank_right: usize,
    params: usize,
}

impl OmegaRows {
    fn new(tt: &TtTensor, k: usize, indices: &[Vec<usize>]) -> Self {
        let core = tt.core(k);
        let (rl, rr) = (core.rank_left(), core.rank_right());
        let mut rows = Self {
            slots: Vec::with_capacity(indices.len()),
            left: Vec::with_capacity(indices.len() * rl),
            right: Vec::with_capacity(indices.len() * rr),
            rank_left: rl,
            rank_right: rr,
            params: core.len(),
        };
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for idx in indices {
            tt.left_vector(idx, k, &mut l);
            tt.right_vector(idx, k, &mut r);
            rows.slots.push(idx[k]);
            rows.left.extend_from_slice(&l);
            rows.right.extend_from_slice(&r);
        }
        rows
    }

    fn len(&self) -> usize {
        self.slots.len()
    }

    fn row(&self, i: usize) -> (usize, &[f64], &[f64]) {
        let (rl, rr) = (self.rank_left, self.rank_right);
        (
            self.slots[i],
            &self.left[i * rl..(i + 1) * rl],
            &self.right[i * rr..(i + 1) * rr],
        )
    }

    /// `Ω g`.
    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let (rl, rr) = (self.rank_left, self.rank_right);
        (0..self.len())
            .map(|i| {
                let (slot, l, r) = self.row(i);
                let block = &g[slot * rl * rr..(slot + 1) * rl * rr];
                l.iter()
                    .enumerate()
                    .map(|(a, &la)| {
                        la * block[a * rr..(a + 1) * rr].iter().zip(r).map(|(x, y)| x * y).sum::<f64>()
                    })
                    .sum()
            })
            .collect()
    }

    /// `Ω^T Ω / n` and `Ω^T y / n`, exploiting the block-diagonal structure.
    fn normal_equations(&self, y: &[f64]) -> (Matrix, DVector<f64>) {
        let (rl, rr) = (self.rank_left, self.rank_right);
        let block = rl * rr;
        let inv_n = 1.0 / self.len() as f64;
        let mut gram = Matrix::zeros(self.params, self.params);
        let mut rhs = DVector::zeros(self.params);
        let mut outer = vec![0.0; block];
        for (i, &yi) in y.iter().enumerate() {
            let (slot, l, r) = self.row(i);
            for a in 0..rl {
                for b in 0..rr {
                    outer[a * rr + b] = l[a] * r[b];
                }
            }
            let base = slot * block;
            for (p, &op) in outer.iter().enumerate() {
                if op == 0.0 {
                    continue;
                }
                rhs[base + p] += yi * op * inv_n;
                for (q, &oq) in outer.iter().enumerate() {
                    gram[(base + p, base + q)] += op * oq * inv_n;
                }
            }
        }
        (gram, rhs)
    }

    fn to_matrix(&self) -> Matrix {
        let (rl, rr) = (self.rank_left, self.rank_right);
        let mut m = Matrix::zeros(self.len(), self.params);
        for i in 0..self.len() {
            let (slot, l, r) = self.row(i);
            for a in 0..rl {
                for b in 0..rr {
                    m[(i, (slot * rl + a) * rr + b)] = l[a] * r[b];
                }
            }
        }
        m
    }
}

/// `Ω` for core `k` (0-based): row `i` maps `vec(G_k)` to `X(𝒢)[j(i)]`.
pub fn build_omega(tt: &TtTensor, k: usize, indices: &[Vec<usize>]) -> Result<Matrix> {
    check_core(tt, k)?;
    indices.iter().try_for_each(|idx| tt.shape().check_index(idx))?;
    Ok(OmegaRows::new(tt, k, indices).to_matrix())
}

fn check_core(tt: &TtTensor, k: usize) -> Result<()> {
    if k >= tt.order() {
        return Err(TtError::InvalidParameter(format!(
            "core {k} outside 0..{}",
            tt.order()
        )));
    }
    Ok(())
}

/// `Γ` for core `k` (0-based) and projection `p`: the matrix of the linear map
/// `vec(G_k) -> vec P(X(𝒢))`, assembled from contracted interface products.
pub fn build_gamma(tt: &TtTensor, k: usize, p: &SparseProjectionPair) -> Result<Matrix> {
    check_core(tt, k)?;
    if tt.shape() != p.shape() {
        return Err(crate::tensor::shape_mismatch(tt.shape(), p.shape()));
    }
    let cores = tt.cores();
    let core = &cores[k];
    let (rl, rr) = (core.rank_left(), core.rank_right());
    let (d1, d2, split) = (p.d1(), p.d2(), p.split());
    let mut gamma = Matrix::zeros(d1 * d2, core.len());

    if k < split {
        // Free core on the row side. U = G_{k+1}[j] ... G_{split-1}[j] B^T,
        // with B the D_2 x R_split right factor.
        let b_t = p.right_factor(tt).transpose();
        let mut a = Vec::new();
        for (row1, val, idx) in p.left().iter() {
            left_chain(&cores[..k], &idx[..k], &mut a);
            let mut u = b_t.clone();
            for m in (k + 1..split).rev() {
                u = slice_matrix(&cores[m], idx[m] as usize) * u;
            }
            let slot = idx[k] as usize;
            for d in 0..d2 {
                let r = row1 * d2 + d;
                for (ai, &av) in a.iter().enumerate() {
                    let coef = val * av;
                    if coef == 0.0 {
                        continue;
                    }
                    for bi in 0..rr {
                        gamma[(r, (slot * rl + ai) * rr + bi)] += coef * u[(bi, d)];
                    }
                }
            }
        }
    } else {
        // Free core on the column side. V = A G_split[j] ... G_{k-1}[j], with A
        // the D_1 x R_split left factor.
        let a_f = p.left_factor(tt);
        let mut e = Vec::new();
        for (row2, val, idx) in p.right().iter() {
            let local = k - split;
            right_chain(&cores[k + 1..], &idx[local + 1..], &mut e);
            let mut v = a_f.clone();
            for m in split..k {
                v *= slice_matrix(&cores[m], idx[m - split] as usize);
            }
            let slot = idx[local] as usize;
            for d in 0..d1 {
                let r = d * d2 + row2;
                for ai in 0..rl {
                    let coef = val * v[(d, ai)];
                    if coef == 0.0 {
                        continue;
                    }
                    for (bi, &ev) in e.iter().enumerate() {
                        gamma[(r, (slot * rl + ai) * rr + bi)] += coef * ev;
                    }
                }
            }
        }
    }
    Ok(gamma)
}

fn slice_matrix(core: &crate::tt::Core, i: usize) -> Matrix {
    Matrix::from_row_slice(core.rank_left(), core.rank_right(), core.slice(i))
}

/// Reference construction of `Γ`: apply the sketch to the TT obtained by
/// replacing core `k` with each unit vector in turn.
pub fn build_gamma_columnwise(tt: &TtTensor, k: usize, p: &SparseProjectionPair) -> Result<Matrix> {
    check_core(tt, k)?;
    let params = tt.core(k).len();
    let mut gamma = Matrix::zeros(p.d1() * p.d2(), params);
    let mut probe = tt.clone();
    let mut unit = vec![0.0; params];
    for col in 0..params {
        unit[col] = 1.0;
        probe.set_core_data(k, &unit)?;
        unit[col] = 0.0;
        let sketch = project_tt(p, &probe)?;
        for d1 in 0..p.d1() {
            for d2 in 0..p.d2() {
                gamma[(d1 * p.d2() + d2, col)] = sketch[(d1, d2)];
            }
        }
    }
    Ok(gamma)
}

fn mat_row_major(v: &[f64], rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_slice(rows, cols, v)
}

fn vec_row_major(m: &Matrix) -> Vec<f64> {
    crate::tensor::row_major(m)
}

/// Diagnostics of one core update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreUpdate {
    /// Per-core objective at entry.
    pub objective_before: f64,
    /// Per-core objective at the returned core.
    pub objective_after: f64,
    /// Relative ridge added to make the normal matrix factorizable.
    pub ridge: f64,
}

/// Factor `A + ridge * mean(diag A) * I`, growing the ridge until Cholesky
/// succeeds.
fn factor_with_ridge(a: &Matrix) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let dim = a.nrows();
    let mean_diag = a.diagonal().iter().sum::<f64>() / dim as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut rel = 1e-10;
    while rel <= 1e-2 {
        let mut m = a.clone();
        for i in 0..dim {
            m[(i, i)] += rel * scale;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, rel));
        }
        rel *= 100.0;
    }
    Err(TtError::Numerical(format!("normal matrix of size {dim} not factorizable")))
}

/// `η` at which the data and consensus blocks of the normal matrix have equal
/// trace: `(K-1) tr(Ω^T Ω / n) / Σ tr(Γ^T Γ)`.
fn balanced_eta(data: &Matrix, grams: &[Matrix], splits: usize) -> Option<f64> {
    let t_data = data.trace();
    let t_sketch: f64 = grams.iter().map(|g| g.trace()).sum();
    let eta = splits as f64 * t_data / t_sketch;
    (eta.is_finite() && eta > 0.0).then_some(eta)
}

/// Run the inner ADMM for core `k` (0-based) and store the best core found.
///
/// The returned core never has a larger per-core objective than the one it
/// replaces: the best of the entry point and all inner iterates is kept.
pub fn rals_core_update(
    state: &mut RalsState,
    obs: &ObservationSet,
    k: usize,
    cfg: &RalsConfig,
) -> Result<CoreUpdate> {
    check_core(&state.tt, k)?;
    let splits = state.projections.len();
    let lambda = cfg.solver.lambda;
    let (d1, d2) = (cfg.d1, cfg.d2);

    let omega = OmegaRows::new(&state.tt, k, obs.indices());
    let gammas = state
        .projections
        .iter()
        .map(|p| build_gamma(&state.tt, k, p))
        .collect::<Result<Vec<_>>>()?;
    let (mut a, b0) = omega.normal_equations(obs.values());
    let grams: Vec<Matrix> = gammas.iter().map(|g| g.tr_mul(g)).collect();
    let eta = match cfg.solver.eta {
        Some(eta) => eta,
        None => balanced_eta(&a, &grams, splits).unwrap_or(1.0 / obs.len() as f64),
    };
    // β is scaled by 1/η; keep the unscaled duals fixed when η changes.
    if let Some(prev) = state.eta.filter(|&p| p != eta) {
        let factor = prev / eta;
        state.beta.iter_mut().flatten().for_each(|b| *b *= factor);
    }
    state.eta = Some(eta);
    let weight = eta / splits as f64;
    for g in &grams {
        a += g * weight;
    }
    let (chol, ridge) = factor_with_ridge(&a)?;

    let objective = |g: &[f64]| -> Result<f64> {
        let fit = rms_diff(&omega.apply(g), obs.values());
        let mut reg = 0.0;
        if lambda > 0.0 {
            let gv = DVector::from_column_slice(g);
            for gm in &gammas {
                let sk = gm * &gv;
                reg += schatten1(&mat_row_major(sk.as_slice(), d1, d2))?;
            }
        }
        Ok(0.5 * fit * fit + lambda / splits as f64 * reg)
    };

    let entry = state.tt.core(k).data().to_vec();
    let before = objective(&entry)?;
    let mut best = (before, entry);

    let threshold = lambda / eta;
    for _ in 0..cfg.inner_iters {
        let mut rhs = b0.clone();
        for ((gm, w), beta) in gammas.iter().zip(&state.w).zip(&state.beta) {
            let diff: Vec<f64> = vec_row_major(w).iter().zip(beta).map(|(w, b)| w - b).collect();
            rhs += gm.tr_mul(&DVector::from_vec(diff)) * weight;
        }
        let g = chol.solve(&rhs);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(TtError::Numerical(format!("core {k} update diverged")));
        }
        for ((gm, w), beta) in gammas.iter().zip(state.w.iter_mut()).zip(state.beta.iter_mut()) {
            let sketch = gm * &g;
            let shifted: Vec<f64> = sketch.iter().zip(beta.iter()).map(|(s, b)| s + b).collect();
            *w = prox_schatten(&mat_row_major(&shifted, d1, d2), threshold)?;
            let wv = vec_row_major(w);
            for ((b, s), wv) in beta.iter_mut().zip(sketch.iter()).zip(&wv) {
                *b += s - wv;
            }
        }
        let value = objective(g.as_slice())?;
        if value < best.0 {
            best = (value, g.as_slice().to_vec());
        }
    }
    state.tt.set_core_data(k, &best.1)?;
    Ok(CoreUpdate {
        objective_before: before,
        objective_after: best.0,
        ridge,
    })
}

/// Objective with sketched regularizer:
/// `(1/2n)||Y - 𝔛(X)||² + λ/(K-1) Σ_{k'} ||P_{k'}(X)||_s`.
pub fn rals_objective(state: &RalsState, obs: &ObservationSet, lambda: f64) -> Result<f64> {
    let pred = crate::observation::apply_mask(&state.tt, obs.indices())?;
    let fit = rms_diff(&pred, obs.values());
    let mut reg = 0.0;
    if lambda > 0.0 {
        for p in &state.projections {
            reg += schatten1(&project_tt(p, &state.tt)?)?;
        }
    }
    Ok(0.5 * fit * fit + lambda / state.projections.len() as f64 * reg)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn run_from(state: &mut RalsState, obs: &ObservationSet, cfg: &RalsConfig) -> Result<SolverReport> {
    let start = Instant::now();
    let mut report = SolverReport::new("tt-rals");
    let k_order = state.tt.order();
    let order: Vec<usize> = match cfg.sweep_order {
        SweepOrder::Ascending => (0..k_order).collect(),
        SweepOrder::Descending => (0..k_order).rev().collect(),
    };
    let floor = 1e-3 * l2(obs.values()).max(f64::MIN_POSITIVE);
    let mut pred = crate::observation::apply_mask(&state.tt, obs.indices())?;
    for sweep in 1..=cfg.outer_sweeps {
        for &k in &order {
            rals_core_update(state, obs, k, cfg)?;
        }
        state.sweep = sweep;
        let next = crate::observation::apply_mask(&state.tt, obs.indices())?;
        let change = l2(&next.iter().zip(&pred).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rel_change = change / l2(&pred).max(floor);
        pred = next;

        let mut residual: f64 = 0.0;
        for (p, w) in state.projections.iter().zip(&state.w) {
            let sk = project_tt(p, &state.tt)?;
            residual = residual.max((&sk - w).norm() / sk.norm().max(floor));
        }
        report.objective.push(rals_objective(state, obs, cfg.solver.lambda)?);
        report.primal_residual.push(residual);
        report.relative_change.push(rel_change);
        report.masked_rmse.push(rms_diff(&pred, obs.values()));
        if rel_change <= cfg.solver.tol_rel {
            report.converged = true;
            break;
        }
    }
    report.iterations = state.sweep;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Continue sweeping an existing state.
pub fn rals_resume(state: &mut RalsState, obs: &ObservationSet, cfg: &RalsConfig) -> Result<SolverReport> {
    cfg.validate()?;
    run_from(state, obs, cfg)
}

/// Run TT-RALS. Only the cores, the observations, the sparse projections and
/// per-core linear systems are ever held in memory, so the solve works for
/// tensors far beyond the dense cap.
pub fn tt_rals_solve(obs: &ObservationSet, cfg: &RalsConfig) -> Result<(TtTensor, SolverReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut best: Option<(f64, TtTensor, SolverReport)> = None;
    for restart in 0..cfg.restarts {
        let seed = if restart == 0 {
            cfg.solver.seed
        } else {
            rng::derive_seed(cfg.solver.seed, restart as u64)
        };
        let mut state = RalsState::init(obs.shape(), cfg, seed)?;
        let report = run_from(&mut state, obs, cfg)?;
        let last = *report.objective.last().unwrap_or(&f64::INFINITY);
        if best.as_ref().is_none_or(|(b, _, _)| last < *b) {
            best = Some((last, state.tt, report));
        }
    }
    let (_, tt, mut report) = best.expect("at least one restart");
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((tt, report))
}

/// Smallest `μ` with `max_i ||P_U e_i||² <= μ r / I_{<=k}` and
/// `max_j ||P_V e_j||² <= μ r / I_{k<}` for the top-`r` singular subspaces of
/// `Q_k(x)`. Diagnostic only.
pub fn incoherence_diagnostic(x: &DenseTensor, k: usize, r: usize) -> Result<f64> {
    let q = x.unfold(k)?;
    let dec = svd(&q)?;
    let top = dec.s.first().copied().unwrap_or(0.0);
    let rank = dec.s.iter().filter(|&&s| s > RANK_TOL * top && top > 0.0).count();
    if r == 0 || r > rank {
        return Err(TtError::InvalidParameter(format!(
            "requested {r} singular vectors but the unfolding has rank {rank}"
        )));
    }
    let (m, n) = (q.nrows() as f64, q.ncols() as f64);
    let u = dec.u.columns(0, r);
    let vt = dec.vt.rows(0, r);
    let mu_u = u.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max) * m / r as f64;
    let mu_v = vt.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max) * n / r as f64;
    Ok(mu_u.max(mu_v))
}
