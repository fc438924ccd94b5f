//! Scaling of solver time with tensor order.

use std::time::Instant;

use anyhow::{bail, Result};
use serde::Serialize;
use ttrals::observation::{observe, sample_mask};
use ttrals::rals::{rals_resume, RalsState};
use ttrals::rng::derive_seed;
use ttrals::{random_tt, tt_admm_solve, RalsConfig, Shape, SolverConfig, Sparsity};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub orders: Vec<usize>,
    pub dim: usize,
    pub rank: usize,
    pub observed: usize,
    pub d: usize,
    /// Nonzeros per projection side, held fixed across orders.
    pub nnz: usize,
    pub sweeps: usize,
    pub inner_iters: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            orders: (4..=10).collect(),
            dim: 10,
            rank: 4,
            observed: 2000,
            d: 10,
            nnz: 200,
            sweeps: 1,
            inner_iters: 5,
            repeats: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub solver: String,
    #[serde(rename = "K")]
    pub k: usize,
    /// Median over repeats of the time per outer sweep (or per solve for
    /// TT-ADMM).
    pub seconds: f64,
    /// Upper bound on the bytes of solver working storage.
    pub memory_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln(seconds)` on `ln(K)`.
    pub exponent: Option<f64>,
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn rals_memory(shape: &Shape, spec: &BenchSpec, state: &RalsState) -> u64 {
    let k = shape.order() as u64;
    let (i, r, d2) = (spec.dim as u64, spec.rank as u64, (spec.d * spec.d) as u64);
    let params = i * r * r;
    let cores: u64 = state.tt.num_params() as u64 * 8;
    let proj: u64 = state.projections.iter().map(|p| p.storage_bytes() as u64).sum();
    let gamma = (k - 1) * d2 * params * 8;
    let normal = params * params * 8;
    let omega = spec.observed as u64 * (2 * r + 1) * 8;
    let obs = spec.observed as u64 * (k + 1) * 8;
    cores + proj + gamma + normal + omega + obs
}

/// Time TT-RALS sweeps across orders at fixed `I`, `R`, `n`, `D` and
/// projection nonzeros, and fit the growth exponent.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.orders.is_empty() || spec.repeats == 0 || spec.sweeps == 0 {
        bail!(CliError::Usage("bench needs orders, repeats and sweeps".into()));
    }
    let mut rows = Vec::new();
    for &k in &spec.orders {
        let shape = Shape::new(vec![spec.dim; k])?;
        let seed = derive_seed(spec.seed, k as u64);
        let truth = random_tt(&shape, &vec![spec.rank; k - 1], seed)?;
        let obs = observe(&truth, sample_mask(&shape, spec.observed.min(shape.numel()), seed)?, 0.0, seed)?;
        let cfg = RalsConfig {
            // tol_rel = 0 so every repeat runs all sweeps.
            solver: SolverConfig { lambda: 1e-3, seed, tol_rel: 0.0, ..Default::default() },
            d1: spec.d,
            d2: spec.d,
            sparsity: Sparsity::Budget { nnz: spec.nnz, min: 3.0 },
            max_rank: spec.rank,
            outer_sweeps: spec.sweeps,
            inner_iters: spec.inner_iters,
            ..Default::default()
        };
        let mut times = Vec::new();
        let mut memory = 0;
        for rep in 0..spec.repeats {
            let mut state = RalsState::init(&shape, &cfg, derive_seed(seed, rep as u64))?;
            memory = rals_memory(&shape, spec, &state);
            let start = Instant::now();
            rals_resume(&mut state, &obs, &cfg)?;
            times.push(start.elapsed().as_secs_f64() / spec.sweeps as f64);
        }
        rows.push(BenchRow {
            solver: "tt-rals".into(),
            k,
            seconds: median(times),
            memory_bytes: memory,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.k as f64, r.seconds)).unzip();
    Ok(BenchReport {
        exponent: loglog_slope(&x, &y),
        rows,
    })
}

/// Time full TT-ADMM solves across orders at mode size `dim`.
pub fn run_admm_bench(orders: &[usize], dim: usize, ratio: f64, seed: u64, max_iter: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &k in orders {
        let shape = Shape::new(vec![dim; k])?;
        let truth = random_tt(&shape, &vec![2; k - 1], seed)?;
        let n = ((ratio * shape.numel() as f64) as usize).max(1);
        let obs = observe(&truth, sample_mask(&shape, n, seed)?, 0.0, seed)?;
        let cfg = SolverConfig { lambda: 1e-3, max_iter, tol_rel: 0.0, tol_feas: 0.0, ..Default::default() };
        let start = Instant::now();
        tt_admm_solve(&obs, &cfg)?;
        rows.push(BenchRow {
            solver: "tt-admm".into(),
            k,
            seconds: start.elapsed().as_secs_f64() / max_iter as f64,
            memory_bytes: ttrals::admm_footprint(&shape) as u64 * 8,
        });
    }
    Ok(rows)
}
