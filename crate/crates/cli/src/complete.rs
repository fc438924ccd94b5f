//! Completion from an observation file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use ttrals::io::{read_observations, write_dense, write_tt};
use ttrals::{tt_admm_solve, tt_rals_solve, ObservationSet, RalsConfig, Shape, SolverConfig, SolverReport};

use crate::SolverChoice;

/// Files written by one completion run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompleteOutput {
    pub tensor: PathBuf,
    pub report: PathBuf,
    pub masked_rmse: f64,
}

pub fn load_observations(path: &Path, shape: &Shape) -> Result<ObservationSet> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_observations(f, shape).with_context(|| format!("reading {}", path.display()))
}

fn write_report(path: &Path, report: &SolverReport) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), report)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Complete `obs` and write `<stem>-admm.tensor` (dense) and/or
/// `<stem>-rals.tt` (TT checkpoint), each with a `.json` report.
pub fn run_complete(
    obs: &ObservationSet,
    solver: SolverChoice,
    admm: &SolverConfig,
    rals: &RalsConfig,
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<CompleteOutput>> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut outputs = Vec::new();
    if solver.admm() {
        let (x, report) = tt_admm_solve(obs, admm)?;
        let tensor = out_dir.join(format!("{stem}-admm.tensor"));
        let mut w = create(&tensor)?;
        write_dense(&mut w, &x)?;
        w.flush()?;
        let report_path = out_dir.join(format!("{stem}-admm.json"));
        write_report(&report_path, &report)?;
        outputs.push(CompleteOutput {
            tensor,
            report: report_path,
            masked_rmse: obs.rmse(&x)?,
        });
    }
    if solver.rals() {
        let (x, report) = tt_rals_solve(obs, rals)?;
        let tensor = out_dir.join(format!("{stem}-rals.tt"));
        let mut w = create(&tensor)?;
        write_tt(&mut w, &x)?;
        w.flush()?;
        let report_path = out_dir.join(format!("{stem}-rals.json"));
        write_report(&report_path, &report)?;
        outputs.push(CompleteOutput {
            tensor,
            report: report_path,
            masked_rmse: obs.rmse(&x)?,
        });
    }
    Ok(outputs)
}
