//! Completion of empirical higher-order Markov transition tensors.
//!
//! A series is discretized into `b` equal-mass bins. The order-`K` tensor has
//! `K - 1` history modes followed by the current symbol, and holds the
//! conditional law `P(w_t | w_{t-K+1}, ..., w_{t-1})`. Counts are stored per
//! visited history only; unvisited histories read as uniform `1/b`.

use std::collections::HashMap;
use std::time::Instant;

use anyhow::{bail, Result};
use serde::Serialize;
use ttrals::observation::sample_mask;
use ttrals::rng::derive_seed;
use ttrals::tensor::check_cap;
use ttrals::{
    admm_footprint, tt_admm_solve, tt_rals_solve, DenseTensor, ObservationSet, RalsConfig, Shape, SolverConfig,
    Tensor, TtError,
};

use crate::{CliError, SolverChoice};

/// Quantile bin edges: `b - 1` thresholds at the `j/b` quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    edges: Vec<f64>,
}

impl Discretizer {
    pub fn fit(series: &[f64], b: usize) -> Result<Self> {
        if b < 2 {
            bail!(CliError::Usage(format!("need at least 2 bins, got {b}")));
        }
        if series.is_empty() {
            bail!(CliError::Usage("empty series".into()));
        }
        let mut sorted = series.to_vec();
        sorted.sort_by(f64::total_cmp);
        let edges = (1..b).map(|j| sorted[j * sorted.len() / b]).collect();
        Ok(Self { edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() + 1
    }

    /// Number of edges at or below `v`.
    pub fn symbol(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e <= v)
    }

    pub fn apply(&self, series: &[f64]) -> Vec<usize> {
        series.iter().map(|&v| self.symbol(v)).collect()
    }
}

/// Sparse conditional transition tensor of order `K` over `b` symbols.
#[derive(Debug, Clone)]
pub struct MarkovTensor {
    shape: Shape,
    bins: usize,
    /// History linear index -> symbol counts.
    counts: HashMap<usize, Vec<u64>>,
}

impl MarkovTensor {
    pub fn from_symbols(symbols: &[usize], bins: usize, order: usize) -> Result<Self> {
        if order < 2 {
            bail!(CliError::Usage(format!("order must be >= 2, got {order}")));
        }
        if symbols.len() <= order {
            bail!(CliError::Usage(format!(
                "series of length {} too short for order {order}",
                symbols.len()
            )));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= bins) {
            bail!(CliError::Usage(format!("symbol {s} outside 0..{bins}")));
        }
        let shape = Shape::new(vec![bins; order])?;
        let hist = order - 1;
        let mut counts: HashMap<usize, Vec<u64>> = HashMap::new();
        for w in symbols.windows(order) {
            let h = w[..hist].iter().fold(0usize, |acc, &s| acc * bins + s);
            counts.entry(h).or_insert_with(|| vec![0; bins])[w[hist]] += 1;
        }
        Ok(Self { shape, bins, counts })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn visited(&self) -> usize {
        self.counts.len()
    }

    /// Visited histories in increasing linear order.
    pub fn histories(&self) -> Vec<usize> {
        let mut h: Vec<usize> = self.counts.keys().copied().collect();
        h.sort_unstable();
        h
    }

    /// `P(· | history)`; uniform for unvisited histories.
    pub fn conditional(&self, history: usize) -> Vec<f64> {
        match self.counts.get(&history) {
            Some(c) => {
                let total: u64 = c.iter().sum();
                c.iter().map(|&v| v as f64 / total as f64).collect()
            }
            None => vec![1.0 / self.bins as f64; self.bins],
        }
    }

    pub fn is_visited(&self, history: usize) -> bool {
        self.counts.contains_key(&history)
    }

    fn history_of(&self, index: &[usize]) -> usize {
        index[..index.len() - 1].iter().fold(0, |acc, &s| acc * self.bins + s)
    }

    /// Full index of `(history, symbol)`.
    pub fn index_of(&self, history: usize, symbol: usize) -> Vec<usize> {
        let k = self.shape.order();
        let mut idx = vec![0; k];
        let mut h = history;
        for slot in idx[..k - 1].iter_mut().rev() {
            *slot = h % self.bins;
            h /= self.bins;
        }
        idx[k - 1] = symbol;
        idx
    }
}

impl Tensor for MarkovTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn element(&self, index: &[usize]) -> f64 {
        let w = index[index.len() - 1];
        match self.counts.get(&self.history_of(index)) {
            Some(c) => c[w] as f64 / c.iter().sum::<u64>() as f64,
            None => 1.0 / self.bins as f64,
        }
    }

    fn to_dense_capped(&self, cap: usize) -> ttrals::Result<std::borrow::Cow<'_, DenseTensor>> {
        check_cap(self.shape.numel() as u128, cap)?;
        let mut values = vec![1.0 / self.bins as f64; self.shape.numel()];
        for (&h, _) in &self.counts {
            let p = self.conditional(h);
            values[h * self.bins..(h + 1) * self.bins].copy_from_slice(&p);
        }
        Ok(std::borrow::Cow::Owned(DenseTensor::new(self.shape.clone(), values)?))
    }
}

/// Discretize `series` into `b` quantile bins and count order-`K` transitions.
pub fn build_markov_tensor(series: &[f64], b: usize, k_order: usize) -> Result<(MarkovTensor, Discretizer)> {
    let disc = Discretizer::fit(series, b)?;
    let tensor = MarkovTensor::from_symbols(&disc.apply(series), disc.bins(), k_order)?;
    Ok((tensor, disc))
}

/// `n` uniformly sampled cells of the tensor with their exact values.
pub fn sample_observations(tensor: &MarkovTensor, n: usize, seed: u64) -> Result<ObservationSet> {
    let indices = sample_mask(tensor.shape(), n, seed)?;
    let values = indices.iter().map(|i| tensor.element(i)).collect();
    Ok(ObservationSet::new(tensor.shape().clone(), indices, values)?)
}

/// `n` cells drawn uniformly from the visited histories only.
pub fn sample_visited_observations(tensor: &MarkovTensor, n: usize, seed: u64) -> Result<ObservationSet> {
    let histories = tensor.histories();
    let grid = Shape::new(vec![histories.len().max(1), tensor.bins])?;
    if histories.is_empty() {
        bail!(CliError::Usage("training series visits no history".into()));
    }
    let cells = sample_mask(&grid, n.min(grid.numel()), seed)?;
    let indices: Vec<Vec<usize>> = cells.iter().map(|c| tensor.index_of(histories[c[0]], c[1])).collect();
    let values = indices.iter().map(|i| tensor.element(i)).collect();
    Ok(ObservationSet::new(tensor.shape().clone(), indices, values)?)
}

#[derive(Debug, Clone)]
pub struct MarkovSpec {
    pub bins: usize,
    pub orders: Vec<usize>,
    pub observed: usize,
    pub lambdas: Vec<f64>,
    /// Fraction of the series used for training.
    pub split: f64,
    pub seed: u64,
    /// Sample only cells of visited histories instead of the whole tensor.
    pub visited_only: bool,
    pub solver: SolverChoice,
    pub admm: SolverConfig,
    pub rals: RalsConfig,
}

impl MarkovSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || self.orders.is_empty() || self.orders.iter().any(|&k| k < 2) {
            bail!(CliError::Usage("need bins >= 2 and orders >= 2".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            bail!(CliError::Usage(format!("split {} outside (0, 1)", self.split)));
        }
        if self.lambdas.is_empty() || self.observed == 0 {
            bail!(CliError::Usage("lambda grid and observation count must be non-empty".into()));
        }
        Ok(())
    }
}

/// One (method, K, λ) result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovRow {
    pub solver: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: f64,
    /// RMSE against held-out conditionals on test-visited histories; empty
    /// when the solver did not run.
    pub error: Option<f64>,
    pub train_rmse: Option<f64>,
    pub seconds: f64,
    pub iters: usize,
    pub status: String,
    pub seed: u64,
}

/// RMSE between `estimate` and the empirical conditionals of `test` over the
/// histories `test` visits.
pub fn prediction_error<T: Tensor + ?Sized>(estimate: &T, test: &MarkovTensor) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for h in test.histories() {
        let p = test.conditional(h);
        for (w, &pw) in p.iter().enumerate() {
            let d = estimate.element(&test.index_of(h, w)) - pw;
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        bail!(CliError::Usage("test series visits no history".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// A completed transition tensor with its training fit.
pub struct MarkovFit {
    pub estimate: Box<dyn Tensor>,
    pub train_rmse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sample observed cells of `train` and complete them with one solver.
pub fn fit_markov(spec: &MarkovSpec, train: &MarkovTensor, admm: bool, lambda: f64, seed: u64) -> Result<MarkovFit> {
    let obs = if spec.visited_only {
        sample_visited_observations(train, spec.observed, seed)?
    } else {
        sample_observations(train, spec.observed.min(train.shape().numel()), seed)?
    };
    let (estimate, report): (Box<dyn Tensor>, _) = if admm {
        let cfg = SolverConfig { lambda, seed, ..spec.admm.clone() };
        check_cap(admm_footprint(obs.shape()), cfg.dense_cap)?;
        let (x, rep) = tt_admm_solve(&obs, &cfg)?;
        (Box::new(x), rep)
    } else {
        let mut cfg = spec.rals.clone();
        cfg.solver.lambda = lambda;
        cfg.solver.seed = seed;
        let (x, rep) = tt_rals_solve(&obs, &cfg)?;
        (Box::new(x), rep)
    };
    Ok(MarkovFit {
        train_rmse: obs.rmse(estimate.as_ref())?,
        estimate,
        iterations: report.iterations,
        converged: report.converged,
    })
}

/// Run one (K, λ, solver) configuration on prepared train/test tensors.
pub fn complete_markov(
    spec: &MarkovSpec,
    train: &MarkovTensor,
    test: &MarkovTensor,
    admm: bool,
    lambda: f64,
    seed: u64,
) -> MarkovRow {
    let k = train.shape().order();
    let start = Instant::now();
    let outcome = fit_markov(spec, train, admm, lambda, seed).and_then(|fit| {
        Ok((prediction_error(fit.estimate.as_ref(), test)?, fit.train_rmse, fit.iterations, fit.converged))
    });
    let seconds = start.elapsed().as_secs_f64();
    let base = MarkovRow {
        solver: if admm { "tt-admm" } else { "tt-rals" }.into(),
        k,
        lambda,
        error: None,
        train_rmse: None,
        seconds,
        iters: 0,
        status: String::new(),
        seed,
    };
    match outcome {
        Ok((e, t, iters, conv)) => MarkovRow {
            error: Some(e),
            train_rmse: Some(t),
            iters,
            status: if conv { "ok" } else { "max-iter" }.into(),
            ..base
        },
        Err(err) => {
            let status = match err.downcast_ref::<TtError>() {
                Some(TtError::DenseCapExceeded { .. }) => "refused: dense cap exceeded".to_string(),
                _ => format!("failed: {err}"),
            };
            MarkovRow { status, ..base }
        }
    }
}

/// Split the series, build train/test tensors per order and complete them.
pub fn run_markov(spec: &MarkovSpec, series: &[f64], mut sink: impl FnMut(&MarkovRow) -> Result<()>) -> Result<Vec<MarkovRow>> {
    spec.validate()?;
    let cut = (series.len() as f64 * spec.split).round() as usize;
    let (train_s, test_s) = series.split_at(cut.min(series.len()));
    let disc = Discretizer::fit(train_s, spec.bins)?;
    let (train_sym, test_sym) = (disc.apply(train_s), disc.apply(test_s));
    let mut rows = Vec::new();
    for &k in &spec.orders {
        let train = MarkovTensor::from_symbols(&train_sym, disc.bins(), k)?;
        let test = MarkovTensor::from_symbols(&test_sym, disc.bins(), k)?;
        let seed = derive_seed(spec.seed, k as u64);
        for &lambda in &spec.lambdas {
            for admm in [true, false] {
                if (admm && !spec.solver.admm()) || (!admm && !spec.solver.rals()) {
                    continue;
                }
                let row = complete_markov(spec, &train, &test, admm, lambda, seed);
                sink(&row)?;
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn write_rows<W: std::io::Write>(w: W, rows: &[MarkovRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn quantile_bins_are_equal_mass() {
        let series: Vec<f64> = (0..1000).map(f64::from).collect();
        let d = Discretizer::fit(&series, 10).unwrap();
        let mut hist = [0usize; 10];
        for s in d.apply(&series) {
            hist[s] += 1;
        }
        assert!(hist.iter().all(|&c| c == 100));
    }

    #[test]
    fn constant_series_is_point_mass() {
        let (t, _) = build_markov_tensor(&[2.5; 50], 4, 3).unwrap();
        assert_eq!(t.visited(), 1);
        let h = t.histories()[0];
        let p = t.conditional(h);
        assert_eq!(p.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(p.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn conditionals_sum_to_one_and_unvisited_is_uniform() {
        let series: Vec<f64> = (0..500).map(|t| ((t * 37) % 11) as f64).collect();
        let (t, _) = build_markov_tensor(&series, 5, 4).unwrap();
        for h in t.histories() {
            assert!((t.conditional(h).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let unvisited = (0..t.shape().numel() / 5).find(|h| !t.is_visited(*h)).unwrap();
        assert_eq!(t.conditional(unvisited), vec![0.2; 5]);
        let dense = t.to_dense_capped(usize::MAX).unwrap();
        let idx = t.index_of(t.histories()[3], 2);
        assert_eq!(dense.get(&idx).unwrap(), t.element(&idx));
    }

    #[test]
    fn iid_symbols_approach_uniform() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let symbols: Vec<usize> = (0..200_000).map(|_| rng.random_range(0..4)).collect();
        let t = MarkovTensor::from_symbols(&symbols, 4, 3).unwrap();
        for h in t.histories() {
            let c = &t.counts[&h];
            let total: u64 = c.iter().sum();
            let se = (0.25 * 0.75 / total as f64).sqrt();
            for p in t.conditional(h) {
                assert!((p - 0.25).abs() <= 3.0 * se + 1e-12, "{p} with {total}");
            }
        }
    }

    #[test]
    fn large_order_stays_sparse() {
        let series: Vec<f64> = (0..2000).map(|t| (t as f64 * 0.7).sin()).collect();
        let (t, _) = build_markov_tensor(&series, 10, 10).unwrap();
        assert!(t.visited() < 2000);
        assert!(t.to_dense_capped(ttrals::DEFAULT_DENSE_CAP).is_err());
        let obs = sample_observations(&t, 1000, 1).unwrap();
        assert_eq!(obs.len(), 1000);
        let visited = sample_visited_observations(&t, 1000, 1).unwrap();
        assert!(visited.indices().iter().all(|i| t.is_visited(t.history_of(i))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_markov_tensor(&[1.0, 2.0], 2, 2).is_err());
        assert!(build_markov_tensor(&[1.0; 10], 1, 2).is_err());
    }
}
