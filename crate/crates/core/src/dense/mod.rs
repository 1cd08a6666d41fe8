//! Dense small-scale ground truth: Hamiltonian Schur solve, dense subspace
//! iteration and the convergence-bound quantities.

mod analysis;
mod care;
mod iteration;

pub use analysis::{analyze_hamiltonian, convergence_bound, sep, spectral_radius_identity_check, HamiltonianAnalysis, SpectralRadiusCheck};
pub use care::{dense_care_solve, hamiltonian, ordered_hamiltonian_schur, solve_care_dense};
pub use iteration::{
    cayley, cayley_form_gap, dense_subspace_iteration, fixed_point_step, schur_complements, symplectic_blocks,
    DenseIterate, SymplecticBlocks,
};

use crate::error::Result;
use crate::linalg::CMat;
use crate::problem::CareProblem;

/// Standard-form dense data `A^* X + X A - X F X + G = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCare {
    pub a: CMat,
    pub f: CMat,
    pub g: CMat,
}

impl DenseCare {
    pub fn new(a: CMat, f: CMat, g: CMat) -> Self {
        Self { a, f, g }
    }

    /// `(A E^{-1}, B B^*, E^{-*} C^* C E^{-1})`, which has the same solution set.
    pub fn from_problem(problem: &CareProblem) -> Result<Self> {
        let (a, f, g) = problem.dense_standard_form()?;
        Ok(Self { a, f, g })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `A^* X + X A - X F X + G`.
    pub fn residual(&self, x: &CMat) -> CMat {
        self.a.adjoint() * x + x * &self.a - x * &self.f * x + &self.g
    }
}

/// `A^* X E + E^* X A - E^* X B B^* X E + C^* C` assembled densely.
pub fn problem_residual(problem: &CareProblem, x: &CMat) -> CMat {
    let a = problem.a().to_dense_complex();
    let b = problem.b_complex();
    let c = crate::linalg::to_complex(problem.c());
    let xe = match problem.e() {
        Some(e) => x * e.to_dense_complex(),
        None => x.clone(),
    };
    let ax = a.adjoint() * &xe;
    let xb = xe.adjoint() * &b;
    &ax + ax.adjoint() - &xb * xb.adjoint() + c.adjoint() * c
}
