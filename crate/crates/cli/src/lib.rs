//! Command-line harness for the `riccati-si-core` solvers: JSON run
//! configurations, MatrixMarket input, CSV/JSON results and solver comparison.

pub mod config;
pub mod error;
pub mod mtx;
pub mod output;
pub mod runner;
