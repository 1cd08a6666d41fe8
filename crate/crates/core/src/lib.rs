//! Low-rank solvers for large continuous algebraic Riccati equations
//!
//! ```text
//! A^* X E + E^* X A - E^* X B B^* X E + C^* C = 0
//! ```
//!
//! The crate provides:
//!
//! - [`ilrsi`]: the incremental low-rank subspace iteration (a Cayley-transformed
//!   invariant subspace iteration on the Hamiltonian matrix written as a rank-`p`
//!   update per step), together with the generic non-nested recursion used as a
//!   reference and the economical residual-norm evaluation.
//! - [`rksm`]: a Galerkin rational Krylov subspace solver with precomputed or
//!   adaptive (plain or stabilized Ritz) poles, and [`galerkin`] diagnostics
//!   relating both methods on the distinct-pole basis.
//! - [`shifts`]: shift sequences, the rational min-max objective and Penzl-style
//!   shift selection.
//! - [`dense`]: small-scale ground truth (Hamiltonian Schur solve, dense
//!   subspace iteration, convergence-bound apparatus).
//!
//! The crate is `no_std` and only needs `alloc`. Timing enters through the
//! [`history::Clock`] trait so that hosted callers can attach a real clock.
#![no_std]

extern crate alloc;

pub mod banded;
pub mod dense;
pub mod error;
pub mod galerkin;
pub mod history;
pub mod ilrsi;
pub mod krylov;
pub mod linalg;
pub mod problem;
pub mod residual;
pub mod rksm;
pub mod shifts;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use history::{Clock, ConvergenceHistory, IterationRecord, NoClock, SolveStatus};
pub use ilrsi::{IlrsiOptions, IlrsiState, LowRankSolution, Middle};
pub use linalg::{CMat, CVec, RMat, C64};
pub use problem::CareProblem;
pub use shifts::{ShiftOrigin, ShiftSequence};
pub use sparse::SparseMatrix;

/// Problems up to this size are checked for stability with a dense eigensolve.
pub const DEFAULT_STABILITY_THRESHOLD: usize = 500;

/// Largest dimension handled by the dense oracle unless overridden.
pub const DEFAULT_DENSE_THRESHOLD: usize = 400;
