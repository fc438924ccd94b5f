use serde::{Deserialize, Serialize};

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

/// Per-iteration diagnostics of a solve. For TT-ADMM one entry is recorded per
/// ADMM iteration; for TT-RALS one entry per outer sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct SolverReport {
    pub schema_version: u32,
    pub solver: String,
    /// Objective value after each iteration.
    pub objective: Vec<f64>,
    /// Consensus residual between the iterate and its split copies.
    pub primal_residual: Vec<f64>,
    /// Relative change of the iterate (ADMM) or of masked predictions (RALS).
    pub relative_change: Vec<f64>,
    /// Root mean squared error on the observed entries.
    pub masked_rmse: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_seconds: f64,
}

impl SolverReport {
    pub(crate) fn new(solver: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            solver: solver.to_string(),
            ..Self::default()
        }
    }
}
