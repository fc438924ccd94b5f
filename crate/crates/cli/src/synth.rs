//! Synthetic validation: estimation error against the sum of root TT ranks.
//!
//! Every (rank tuple, trial) cell draws its own seed from the base seed; the
//! truth, mask and noise for that cell are shared by all λ values and solvers,
//! so a row is reproducible from `(seed, ranks, lambda, solver)` alone.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ttrals::observation::{observe, sample_mask};
use ttrals::rng::derive_seed;
use ttrals::{
    admm_footprint, frobenius_distance, random_tt, tensor::check_cap, tt_admm_solve, tt_rals_solve,
    ObservationSet, RalsConfig, Shape, SolverConfig, TtError, TtTensor,
};

use crate::{CliError, SolverChoice};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub shape: Vec<usize>,
    /// Values each TT rank ranges over; the grid is their `K - 1`-fold product.
    pub rank_values: Vec<usize>,
    pub ratio: f64,
    pub sigma2: f64,
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverChoice,
    pub admm: SolverConfig,
    /// Template for TT-RALS; `solver.lambda` and `solver.seed` are set per row.
    pub rals: RalsConfig,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<Shape> {
        let shape = Shape::new(self.shape.clone())?;
        if self.rank_values.is_empty() || self.lambdas.is_empty() {
            bail!(CliError::Usage("rank and lambda grids must be non-empty".into()));
        }
        if self.rank_values.contains(&0) {
            bail!(CliError::Usage("ranks must be positive".into()));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            bail!(CliError::Usage(format!("ratio {} outside (0, 1]", self.ratio)));
        }
        if !(self.sigma2 >= 0.0) || self.trials == 0 {
            bail!(CliError::Usage("sigma2 must be >= 0 and trials >= 1".into()));
        }
        if self.solver.admm() {
            check_cap(admm_footprint(&shape), self.admm.dense_cap)?;
        }
        Ok(shape)
    }

    /// Rank tuples in lexicographic order of `rank_values` positions.
    pub fn rank_grid(&self) -> Vec<Vec<usize>> {
        let k = self.shape.len().saturating_sub(1);
        let mut grid = vec![Vec::new()];
        for _ in 0..k {
            grid = grid
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    self.rank_values.iter().map(move |&r| {
                        let mut t = prefix.clone();
                        t.push(r);
                        t
                    })
                })
                .collect();
        }
        grid
    }

    pub fn observed_count(&self, shape: &Shape) -> usize {
        ((self.ratio * shape.numel() as f64).round() as usize).clamp(1, shape.numel())
    }

    pub fn cell_seed(&self, cell: usize, trial: usize) -> u64 {
        derive_seed(self.seed, (cell * self.trials + trial) as u64)
    }
}

/// One results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub solver: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub ranks: String,
    pub srr: f64,
    pub lambda: f64,
    pub trial: usize,
    /// `||X_hat - X*||_F`; empty when the solve failed.
    pub error: Option<f64>,
    pub seconds: f64,
    pub iters: usize,
    pub status: String,
    pub seed: u64,
}

pub fn srr(ranks: &[usize]) -> f64 {
    ranks.iter().map(|&r| (r as f64).sqrt()).sum()
}

pub fn format_ranks(ranks: &[usize]) -> String {
    ranks.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

pub fn parse_ranks(s: &str) -> Result<Vec<usize>> {
    s.split('-')
        .map(|t| t.parse::<usize>().with_context(|| format!("rank tuple {s:?}")))
        .collect()
}

/// Truth and noisy observations of one cell.
pub fn cell_data(spec: &SynthSpec, shape: &Shape, ranks: &[usize], seed: u64) -> Result<(TtTensor, ObservationSet)> {
    let truth = random_tt(shape, ranks, seed)?;
    let mask = sample_mask(shape, spec.observed_count(shape), seed)?;
    let obs = observe(&truth, mask, spec.sigma2.sqrt(), seed)?;
    Ok((truth, obs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    Admm,
    Rals,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::Admm => "tt-admm",
            Which::Rals => "tt-rals",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "tt-admm" => Ok(Which::Admm),
            "tt-rals" => Ok(Which::Rals),
            other => bail!(CliError::Usage(format!("unknown solver {other:?}"))),
        }
    }
}

fn solve_row(
    spec: &SynthSpec,
    which: Which,
    truth: &TtTensor,
    obs: &ObservationSet,
    ranks: &[usize],
    lambda: f64,
    trial: usize,
    seed: u64,
) -> SynthRow {
    let start = Instant::now();
    let outcome: ttrals::Result<(f64, usize, bool)> = match which {
        Which::Admm => {
            let cfg = SolverConfig { lambda, seed, ..spec.admm.clone() };
            tt_admm_solve(obs, &cfg).and_then(|(x, rep)| Ok((frobenius_distance(&x, truth)?, rep.iterations, rep.converged)))
        }
        Which::Rals => {
            let mut cfg = spec.rals.clone();
            cfg.solver.lambda = lambda;
            cfg.solver.seed = seed;
            tt_rals_solve(obs, &cfg).and_then(|(x, rep)| Ok((frobenius_distance(&x, truth)?, rep.iterations, rep.converged)))
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let (error, iters, status) = match outcome {
        Ok((e, it, true)) => (Some(e), it, "ok".to_string()),
        Ok((e, it, false)) => (Some(e), it, "max-iter".to_string()),
        Err(e) => (None, 0, format!("failed: {e}")),
    };
    SynthRow {
        solver: which.name().into(),
        k: spec.shape.len(),
        ranks: format_ranks(ranks),
        srr: srr(ranks),
        lambda,
        trial,
        error,
        seconds,
        iters,
        status,
        seed,
    }
}

/// Run every (rank tuple, trial, λ, solver) combination serially in cell-id
/// order, handing each row to `sink` as it completes.
pub fn run_synth(spec: &SynthSpec, mut sink: impl FnMut(&SynthRow) -> Result<()>) -> Result<Vec<SynthRow>> {
    let shape = spec.validate()?;
    let mut rows = Vec::new();
    for (cell, ranks) in spec.rank_grid().iter().enumerate() {
        for trial in 0..spec.trials {
            let seed = spec.cell_seed(cell, trial);
            let (truth, obs) = cell_data(spec, &shape, ranks, seed)
                .with_context(|| format!("generating ranks {ranks:?} trial {trial}"))?;
            for &lambda in &spec.lambdas {
                let mut solvers = Vec::new();
                if spec.solver.admm() {
                    solvers.push(Which::Admm);
                }
                if spec.solver.rals() {
                    solvers.push(Which::Rals);
                }
                for which in solvers {
                    let row = solve_row(spec, which, &truth, &obs, ranks, lambda, trial, seed);
                    sink(&row)?;
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

/// Recompute a row from its recorded seed, ranks, λ and solver.
pub fn rerun_row(spec: &SynthSpec, row: &SynthRow) -> Result<SynthRow> {
    let shape = Shape::new(spec.shape.clone())?;
    let ranks = parse_ranks(&row.ranks)?;
    if ranks.len() + 1 != shape.order() {
        return Err(TtError::InvalidShape(format!("rank tuple {} for order {}", row.ranks, shape.order())).into());
    }
    let (truth, obs) = cell_data(spec, &shape, &ranks, row.seed)?;
    Ok(solve_row(spec, Which::parse(&row.solver)?, &truth, &obs, &ranks, row.lambda, row.trial, row.seed))
}

pub fn write_rows<W: std::io::Write>(w: W, rows: &[SynthRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> Result<Vec<SynthRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .context("reading results table")
}

/// Mean error over trials for one (solver, rank tuple, λ) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub solver: String,
    pub ranks: String,
    pub srr: f64,
    pub lambda: f64,
    pub mean_error: f64,
    pub trials: usize,
}

/// Group successful rows by (solver, ranks, λ) in first-seen order.
pub fn trend_points(rows: &[SynthRow]) -> Vec<TrendPoint> {
    let mut points: Vec<TrendPoint> = Vec::new();
    for r in rows {
        let Some(e) = r.error else { continue };
        match points
            .iter_mut()
            .find(|p| p.solver == r.solver && p.ranks == r.ranks && p.lambda == r.lambda)
        {
            Some(p) => {
                p.mean_error += e;
                p.trials += 1;
            }
            None => points.push(TrendPoint {
                solver: r.solver.clone(),
                ranks: r.ranks.clone(),
                srr: r.srr,
                lambda: r.lambda,
                mean_error: e,
                trials: 1,
            }),
        }
    }
    for p in &mut points {
        p.mean_error /= p.trials as f64;
    }
    points
}

/// Sample Pearson correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Correlation between mean error and SRR over every (ranks, λ) point of a
/// solver.
pub fn srr_correlation(points: &[TrendPoint], solver: &str) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.solver == solver)
        .map(|p| (p.srr, p.mean_error))
        .unzip();
    pearson(&x, &y)
}

/// Per rank tuple, the mean error at the best λ.
pub fn lambda_optimal(points: &[TrendPoint], solver: &str) -> Vec<(Vec<usize>, f64)> {
    let mut best: Vec<(String, f64)> = Vec::new();
    for p in points.iter().filter(|p| p.solver == solver) {
        match best.iter_mut().find(|(r, _)| *r == p.ranks) {
            Some((_, e)) => *e = e.min(p.mean_error),
            None => best.push((p.ranks.clone(), p.mean_error)),
        }
    }
    best.into_iter()
        .filter_map(|(r, e)| parse_ranks(&r).ok().map(|t| (t, e)))
        .collect()
}

/// Fraction of rank-grid neighbours (tuples differing in one coordinate by
/// one grid step) whose λ-optimal error does not decrease as the rank grows.
/// Returns `(monotone pairs, total pairs)`.
pub fn monotone_pairs(optimal: &[(Vec<usize>, f64)], rank_values: &[usize]) -> (usize, usize) {
    let mut values = rank_values.to_vec();
    values.sort_unstable();
    values.dedup();
    let step = |r: usize| values.iter().position(|&v| v == r).and_then(|p| values.get(p + 1)).copied();
    let (mut ok, mut total) = (0, 0);
    for (ranks, e_low) in optimal {
        for pos in 0..ranks.len() {
            let Some(up) = step(ranks[pos]) else { continue };
            let mut higher = ranks.clone();
            higher[pos] = up;
            if let Some((_, e_high)) = optimal.iter().find(|(r, _)| *r == higher) {
                total += 1;
                if e_high >= e_low {
                    ok += 1;
                }
            }
        }
    }
    (ok, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec {
            shape: vec![3, 4, 3],
            rank_values: vec![1, 2],
            ratio: 1.0,
            sigma2: 0.0,
            lambdas: vec![1e-8],
            trials: 2,
            seed: 7,
            solver: SolverChoice::Both,
            admm: SolverConfig::default(),
            rals: RalsConfig {
                d1: 4,
                d2: 4,
                sparsity: ttrals::Sparsity::Fixed(3.0),
                max_rank: 3,
                ..Default::default()
            },
        }
    }

    #[test]
    fn grid_and_srr() {
        let s = spec();
        assert_eq!(s.rank_grid(), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        assert!((srr(&[4, 9]) - 5.0).abs() < 1e-15);
        assert_eq!(parse_ranks(&format_ranks(&[3, 5, 7])).unwrap(), vec![3, 5, 7]);
    }

    #[test]
    fn noiseless_full_rows_are_accurate_and_reproducible() {
        let s = spec();
        let rows = run_synth(&s, |_| Ok(())).unwrap();
        assert_eq!(rows.len(), 4 * 2 * 2);
        for r in &rows {
            assert!(r.error.unwrap() <= 1e-3, "{r:?}");
        }
        let again = rerun_row(&s, &rows[5]).unwrap();
        assert_eq!(again.error, rows[5].error);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![SynthRow {
            solver: "tt-rals".into(),
            k: 4,
            ranks: "3-5-7".into(),
            srr: srr(&[3, 5, 7]),
            lambda: 1.0,
            trial: 0,
            error: None,
            seconds: 0.5,
            iters: 0,
            status: "failed: x".into(),
            seed: 9,
        }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("solver,K,ranks,srr,lambda,trial,error,seconds,iters,status,seed"));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn trend_statistics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_none());
        let optimal = vec![(vec![1, 1], 1.0), (vec![1, 2], 2.0), (vec![2, 1], 0.5), (vec![2, 2], 3.0)];
        assert_eq!(monotone_pairs(&optimal, &[1, 2]), (3, 4));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec();
        s.ratio = 0.0;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.shape = vec![10; 8];
        let err = s.validate().unwrap_err();
        assert_eq!(crate::exit_code(&err), 3);
    }
}
