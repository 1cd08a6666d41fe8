//! Per-iteration convergence records.

use alloc::vec::Vec;

/// Source of elapsed wall time in seconds. The core crate has no clock of its
/// own; hosted callers plug one in.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Number of basis columns.
    pub dim: usize,
    /// Numerical rank of the basis.
    pub rank: usize,
    /// `||R_k||_F / ||C^* C||_F`.
    pub rel_residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Breakdown,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceHistory {
    records: Vec<IterationRecord>,
    pub status: SolveStatus,
}

impl Default for ConvergenceHistory {
    fn default() -> Self {
        Self { records: Vec::new(), status: SolveStatus::MaxIter }
    }
}

impl ConvergenceHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: IterationRecord) {
        debug_assert!(self.records.last().map_or(true, |r| r.dim <= record.dim));
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Relative residual at the first record with `dim >= dim`.
    pub fn residual_at_dim(&self, dim: usize) -> Option<f64> {
        self.records.iter().find(|r| r.dim >= dim).map(|r| r.rel_residual)
    }

    /// Smallest dimension at which the residual dropped to `tol`.
    pub fn dim_reaching(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.rel_residual <= tol).map(|r| r.dim)
    }
}
