//! Low-rank tensor completion in the tensor-train (TT) format.
//!
//! Two solvers share the building blocks in this crate:
//!
//! * [`admm`]: a convex solver that regularizes the Schatten TT norm (the
//!   average nuclear norm of all `K - 1` sequential unfoldings) on a dense
//!   iterate. Exact but `O(K prod_k I_k)` in memory.
//! * [`rals`]: randomized alternating least squares that only stores TT cores
//!   and replaces every huge unfolding by a small sparse random sketch
//!   ([`projection`]), so neither time nor space grows exponentially in `K`.
//!
//! Supporting modules cover the TT format ([`tt`]), dense tensors and
//! unfoldings ([`tensor`]), singular-value shrinkage ([`proximal`]), the
//! observation model ([`observation`]) and file formats ([`io`]).

pub mod admm;
pub mod error;
pub mod io;
pub mod observation;
pub mod projection;
pub mod proximal;
pub mod rals;
pub mod report;
pub mod rng;
pub mod tensor;
pub mod tt;

/// Dense real matrix used for unfoldings, sketches and linear systems.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use admm::{admm_footprint, tt_admm_solve, AdmmState, SolverConfig};
pub use error::{Result, TtError};
pub use observation::ObservationSet;
pub use projection::SparseProjectionPair;
pub use rals::{tt_rals_solve, RalsConfig, RalsState, Sparsity, SweepOrder};
pub use report::SolverReport;
pub use tensor::{frobenius_distance, DenseTensor, Shape, Tensor, DEFAULT_DENSE_CAP};
pub use tt::{random_tt, Core, TtTensor};
