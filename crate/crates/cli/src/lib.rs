//! Experiment harness around the `ttrals` solvers: synthetic validation,
//! Markov-chain completion, generic completion from files and scaling
//! benchmarks.

pub mod bench;
pub mod complete;
pub mod error;
pub mod markov;
pub mod synth;

pub use error::{exit_code, CliError};

use std::path::{Path, PathBuf};

/// Environment variable naming the directory relative output paths go to.
pub const OUTPUT_DIR_ENV: &str = "TTRALS_OUTPUT_DIR";

/// Resolve `path` against the output directory when it is relative.
pub fn output_path(path: &Path, dir: Option<&Path>) -> PathBuf {
    match dir {
        Some(d) if path.is_relative() => d.join(path),
        _ => path.to_path_buf(),
    }
}

/// Which solvers an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Admm,
    Rals,
    Both,
}

impl SolverChoice {
    pub fn admm(self) -> bool {
        matches!(self, Self::Admm | Self::Both)
    }

    pub fn rals(self) -> bool {
        matches!(self, Self::Rals | Self::Both)
    }
}
