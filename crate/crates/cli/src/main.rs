use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ttrals::io::read_series;
use ttrals::projection::verify_theorem1;
use ttrals::{RalsConfig, Shape, SolverConfig, Sparsity, DEFAULT_DENSE_CAP};
use ttrals_cli::bench::{run_admm_bench, run_bench, BenchReport, BenchSpec};
use ttrals_cli::complete::{load_observations, run_complete};
use ttrals_cli::markov::{run_markov, MarkovSpec};
use ttrals_cli::synth::{run_synth, SynthSpec};
use ttrals_cli::{exit_code, output_path, SolverChoice, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "ttrals", version, about = "Tensor-train completion experiments")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimation error against SRR on random TT tensors.
    Synth(SynthArgs),
    /// Complete Markov transition tensors built from a time series.
    Markov(MarkovArgs),
    /// Complete a tensor from an observation CSV.
    Complete(CompleteArgs),
    /// Time TT-RALS sweeps against the tensor order.
    Bench(BenchArgs),
    /// Check the Schatten-norm sandwich of sparse projections.
    Sandwich(SandwichArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverChoice::Both, value_enum)]
    solver: SolverChoice,
    /// ADMM penalty; balanced against the data term when omitted.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol_rel: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol_feas: f64,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// TT-RALS estimation rank.
    #[arg(long, default_value_t = 10)]
    est_rank: usize,
    /// Projection size D_1 = D_2.
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Projection sparsity s.
    #[arg(long, default_value_t = 20.0)]
    sparsity: f64,
    /// Nonzeros per projection side; `--sparsity` then acts as a floor.
    /// `markov` defaults to 2000.
    #[arg(long)]
    nnz: Option<usize>,
    #[arg(long, default_value_t = 20)]
    sweeps: usize,
    #[arg(long, default_value_t = 20)]
    inner_iters: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
}

impl SolverArgs {
    fn admm(&self, lambda: f64, seed: u64) -> SolverConfig {
        SolverConfig {
            lambda,
            eta: self.eta,
            max_iter: self.max_iter,
            tol_rel: self.tol_rel,
            tol_feas: self.tol_feas,
            seed,
            dense_cap: self.dense_cap,
        }
    }

    fn rals(&self, lambda: f64, seed: u64) -> RalsConfig {
        RalsConfig {
            solver: self.admm(lambda, seed),
            d1: self.d,
            d2: self.d,
            sparsity: match self.nnz {
                Some(nnz) => Sparsity::Budget { nnz, min: self.sparsity },
                None => Sparsity::Fixed(self.sparsity),
            },
            max_rank: self.est_rank,
            outer_sweeps: self.sweeps,
            inner_iters: self.inner_iters,
            restarts: self.restarts,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,8,10,10")]
    shape: Vec<usize>,
    /// Values each TT rank takes; the grid is their Cartesian product.
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    ranks: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma2: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    lambda: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct MarkovArgs {
    /// Single-column numeric CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, value_delimiter = ',', default_value = "5,7,8,10")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    observed: usize,
    #[arg(long, value_delimiter = ',', default_value = "1e-6")]
    lambda: Vec<f64>,
    /// Fraction of the series used for training.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Sample observed cells from visited histories only.
    #[arg(long)]
    visited_only: bool,
    #[arg(long, default_value = "markov.csv")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CompleteArgs {
    /// Observation CSV with header `i_1,...,i_K,y`.
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "completed")]
    stem: String,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,5,6,7,8,9,10")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    #[arg(long, default_value_t = 2000)]
    observed: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 200)]
    nnz: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Also time TT-ADMM solves at these orders (mode size 4).
    #[arg(long, value_delimiter = ',')]
    admm_orders: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SandwichArgs {
    #[arg(long, value_delimiter = ',', default_value = "6,6,6,6")]
    shape: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,2,2")]
    ranks: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 3.0)]
    sparsity: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "sandwich.json")]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn synth(args: SynthArgs, dir: Option<&Path>) -> Result<()> {
    let spec = SynthSpec {
        shape: args.shape,
        rank_values: args.ranks,
        ratio: args.ratio,
        sigma2: args.sigma2,
        lambdas: args.lambda,
        trials: args.trials,
        seed: args.seed,
        solver: args.solver.solver,
        admm: args.solver.admm(0.0, args.seed),
        rals: args.solver.rals(0.0, args.seed),
    };
    spec.validate()?;
    let path = output_path(&args.out, dir);
    let mut wtr = csv::Writer::from_writer(create(&path)?);
    run_synth(&spec, |row| {
        wtr.serialize(row)?;
        wtr.flush()?;
        eprintln!(
            "{} ranks={} lambda={} trial={} error={} status={}",
            row.solver,
            row.ranks,
            row.lambda,
            row.trial,
            row.error.map_or("-".into(), |e| format!("{e:.6}")),
            row.status
        );
        Ok(())
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn markov(args: MarkovArgs, dir: Option<&Path>) -> Result<()> {
    let series = read_series(File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut solver = args.solver.clone();
    solver.nnz = solver.nnz.or(Some(2000));
    let spec = MarkovSpec {
        bins: args.bins,
        orders: args.orders,
        observed: args.observed,
        lambdas: args.lambda,
        split: args.split,
        seed: args.seed,
        visited_only: args.visited_only,
        solver: solver.solver,
        admm: solver.admm(0.0, args.seed),
        rals: solver.rals(0.0, args.seed),
    };
    let path = output_path(&args.out, dir);
    let mut wtr = csv::Writer::from_writer(create(&path)?);
    let rows = run_markov(&spec, &series, |row| {
        wtr.serialize(row)?;
        wtr.flush()?;
        eprintln!(
            "{} K={} lambda={} error={} seconds={:.2} status={}",
            row.solver,
            row.k,
            row.lambda,
            row.error.map_or("N/A".into(), |e| format!("{e:.6}")),
            row.seconds,
            row.status
        );
        Ok(())
    })?;
    eprintln!("wrote {}", path.display());
    // A run that only asked for TT-ADMM and was refused everywhere is a cap failure.
    if spec.solver == SolverChoice::Admm && rows.iter().all(|r| r.status.starts_with("refused")) {
        let k = spec.orders[0];
        let shape = Shape::new(vec![spec.bins; k])?;
        ttrals::tensor::check_cap(ttrals::admm_footprint(&shape), spec.admm.dense_cap)?;
    }
    Ok(())
}

fn complete(args: CompleteArgs, dir: Option<&Path>) -> Result<()> {
    let shape = Shape::new(args.shape)?;
    let obs = load_observations(&args.obs, &shape)?;
    let out_dir = dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let outputs = run_complete(
        &obs,
        args.solver.solver,
        &args.solver.admm(args.lambda, args.seed),
        &args.solver.rals(args.lambda, args.seed),
        &out_dir,
        &args.stem,
    )?;
    for o in outputs {
        eprintln!(
            "wrote {} and {} (masked rmse {:.6e})",
            o.tensor.display(),
            o.report.display(),
            o.masked_rmse
        );
    }
    Ok(())
}

fn bench(args: BenchArgs, dir: Option<&Path>) -> Result<()> {
    let spec = BenchSpec {
        orders: args.orders,
        dim: args.dim,
        rank: args.rank,
        observed: args.observed,
        d: args.d,
        nnz: args.nnz,
        repeats: args.repeats,
        seed: args.seed,
        ..Default::default()
    };
    let mut report: BenchReport = run_bench(&spec)?;
    if !args.admm_orders.is_empty() {
        report.rows.extend(run_admm_bench(&args.admm_orders, 4, 0.5, args.seed, 5)?);
    }
    for r in &report.rows {
        eprintln!("{} K={} seconds={:.4e} memory={}B", r.solver, r.k, r.seconds, r.memory_bytes);
    }
    match report.exponent {
        Some(e) => eprintln!("tt-rals time ~ K^{e:.2}"),
        None => eprintln!("tt-rals exponent undefined"),
    }
    let path = output_path(&args.out, dir);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "schema_version": ttrals::report::SCHEMA_VERSION, "bench": report }))?;
    w.flush()?;
    Ok(())
}

fn sandwich(args: SandwichArgs, dir: Option<&Path>) -> Result<()> {
    let shape = Shape::new(args.shape)?;
    let report = verify_theorem1(&shape, &args.ranks, args.d, args.sparsity, args.eps, args.trials, args.seed)?;
    eprintln!(
        "sandwich held for {}/{} pairs ({:.3})",
        report.satisfied, report.pairs, report.fraction
    );
    let path = output_path(&args.out, dir);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "schema_version": ttrals::report::SCHEMA_VERSION, "sandwich": report }))?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let dir = cli.output_dir.as_deref();
    let result = match cli.command {
        Command::Synth(a) => synth(a, dir),
        Command::Markov(a) => markov(a, dir),
        Command::Complete(a) => complete(a, dir),
        Command::Bench(a) => bench(a, dir),
        Command::Sandwich(a) => sandwich(a, dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
