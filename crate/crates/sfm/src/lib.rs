//! Near-optimal approximate submodular function minimization under an exact
//! evaluation-oracle budget.
//!
//! The core solver runs projected stochastic subgradient descent on the
//! Lovász extension, but never materializes dense subgradients after the
//! first iterate: a binary-counter schedule maintains O(log T) prepared
//! point-pair segments whose sparse samplers produce unbiased 1-sparse
//! subgradient estimates at an amortized O(1) oracle calls per iteration.
//!
//! Modules:
//! - [`oracle`]: instance descriptions, exact call metering, brute-force
//!   reference minimization and submodularity verification.
//! - [`lovasz`]: the extension, its dense subgradients, prefix-interval
//!   sums, and rounding from the box back to sets.
//! - [`sampler`]: segment preparation and 1-sparse sampling between two
//!   prepared points, plus the dense seed for iterate 0.
//! - [`sgd`]: the projected-subgradient loop, the segment schedule, and the
//!   standard box solver [`sgd::sfm_solve`].
//! - [`sparse`]: minimization over sparsity-constrained sets with calls
//!   scaling in the sparsity rather than n ([`sparse::sparse_sfm`]).
//! - [`multilevel`]: lattice minimization over {1,…,k}^n
//!   ([`multilevel::kgrid_solve`]).
//! - [`continuous`]: continuous objectives on [0,1]^n by discretization
//!   ([`continuous::continuous_solve`]).
//! - [`harness`]: instance generators, amplification, and run summaries for
//!   experiments and the CLI.

pub mod continuous;
pub mod harness;
pub mod lovasz;
pub mod multilevel;
pub mod oracle;
pub mod sampler;
pub mod sgd;
pub mod sparse;

pub use continuous::{continuous_solve, ContinuousObjective, ContinuousResult};
pub use lovasz::{consistent_permutation, dense_subgradient, interval_sum, lovasz_eval, round_to_set};
pub use multilevel::kgrid_solve;
pub use oracle::{OracleError, OracleHandle, SubmodularInstance};
pub use sgd::{sfm_solve, RoundedPoint, SolveResult, SolverConfig};
pub use sparse::{find_index, find_perm, sparse_sfm};
