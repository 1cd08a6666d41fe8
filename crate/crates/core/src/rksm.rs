//! Galerkin projection onto the rational Krylov space
//! `span{(-A^*+alpha_1)^{-1}C^*, (-A^*+alpha_2)^{-1}u_1, ...}` with orthonormal basis `U`.

use alloc::format;
use alloc::vec::Vec;

use crate::banded::ShiftedSolver;
use crate::dense::{solve_care_dense, DenseCare};
use crate::error::{Error, Result};
use crate::history::{Clock, ConvergenceHistory, IterationRecord, NoClock, SolveStatus};
use crate::ilrsi::{residual_columns, residual_middle, LowRankSolution, Middle, SolveFailure};
use crate::linalg::{self, cr, CMat, C64};
use crate::problem::CareProblem;
use crate::residual::IncrementalQr;
use crate::shifts::{next_adaptive_pole, AdaptiveMode, AdaptiveRegion, ShiftOrigin, ShiftSequence};

/// Remainders below this fraction of the column norm are dropped from `U`.
const BASIS_DEFLATION_TOL: f64 = 1e-10;

/// How the next pole is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PoleStrategy {
    /// Cycled in order.
    Precomputed(ShiftSequence),
    /// Greedy rule on the mirrored Ritz values of `U^*AU` or `U^*(A - BB^*X)U`.
    /// Without a region one is estimated from short Arnoldi runs.
    Adaptive { mode: AdaptiveMode, region: Option<AdaptiveRegion> },
}

impl PoleStrategy {
    pub fn origin(&self) -> ShiftOrigin {
        match self {
            PoleStrategy::Precomputed(s) => s.origin(),
            PoleStrategy::Adaptive { mode: AdaptiveMode::Plain, .. } => ShiftOrigin::AdaptiveRitz,
            PoleStrategy::Adaptive { mode: AdaptiveMode::Stabilized, .. } => ShiftOrigin::AdaptiveStabilized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RksmOptions {
    pub tol: f64,
    /// Number of poles, i.e. linear solves with `-A^* + alpha I`.
    pub max_iter: usize,
    pub truncation_tol: f64,
    /// Steps of each Arnoldi run used to estimate the adaptive region.
    pub region_steps: usize,
}

impl Default for RksmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, truncation_tol: 1e-12, region_steps: 20 }
    }
}

impl RksmOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument { what: "tol", reason: "must be positive".into() });
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol < 1.0) {
            return Err(Error::InvalidArgument { what: "truncation_tol", reason: "must lie in (0, 1)".into() });
        }
        if self.region_steps == 0 {
            return Err(Error::InvalidArgument { what: "region_steps", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Basis, projected data and reduced solution after each expansion.
#[derive(Debug, Clone)]
pub struct RksmState {
    u: CMat,
    /// `A^* U`.
    atu: CMat,
    /// `B^* U`.
    bu: CMat,
    /// `C U`.
    cu: CMat,
    /// Most recently added orthonormal block.
    last: CMat,
    poles: Vec<C64>,
    widths: Vec<usize>,
    y: CMat,
    qr: IncrementalQr,
    solver: ShiftedSolver,
    p: usize,
    deflated: usize,
}

impl RksmState {
    /// Empty space; the first `expand` applies the first pole to `C^*`.
    pub fn new(problem: &CareProblem) -> Result<Self> {
        if problem.e().is_some() {
            return Err(Error::Unsupported("the Galerkin solver requires E = I".into()));
        }
        let n = problem.n();
        let mut qr = IncrementalQr::new();
        qr.push_columns(&problem.c_adj());
        Ok(Self {
            u: CMat::zeros(n, 0),
            atu: CMat::zeros(n, 0),
            bu: CMat::zeros(problem.q(), 0),
            cu: CMat::zeros(problem.p(), 0),
            last: problem.c_adj(),
            poles: Vec::new(),
            widths: Vec::new(),
            y: CMat::zeros(0, 0),
            qr,
            solver: ShiftedSolver::new(problem.a(), None),
            p: problem.p(),
            deflated: 0,
        })
    }

    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn y(&self) -> &CMat {
        &self.y
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Columns dropped as numerically dependent so far.
    pub fn deflated(&self) -> usize {
        self.deflated
    }

    pub fn factorizations(&self) -> usize {
        self.solver.factorizations()
    }

    /// `U^*AU`, `U^*FU`, `U^*GU`.
    pub fn projected(&self) -> (CMat, CMat, CMat) {
        let a = self.atu.adjoint() * &self.u;
        let f = self.bu.adjoint() * &self.bu;
        let g = self.cu.adjoint() * &self.cu;
        (a, f, g)
    }

    /// Solves with `pole` on the last block, orthonormalizes against `U` and
    /// re-solves the reduced equation.
    pub fn expand(&mut self, problem: &CareProblem, pole: C64) -> Result<()> {
        let w = self.solver.solve(pole, &self.last)?;
        let block = self.orthonormalize(&w);
        self.poles.push(pole);
        if block.ncols() < w.ncols() {
            let lost = w.ncols() - block.ncols();
            self.deflated += lost;
            log::warn!("pole {pole}: {lost} dependent basis column(s) deflated");
        }
        if block.ncols() > 0 {
            let atw = problem.apply_a_adj(&block);
            self.qr.push_columns(&residual_columns(problem, &block));
            self.atu = linalg::hstack(&self.atu, &atw);
            self.bu = linalg::hstack(&self.bu, &problem.apply_b_adj(&block));
            self.cu = linalg::hstack(&self.cu, &(problem.c_adj().adjoint() * &block));
            self.u = linalg::hstack(&self.u, &block);
            self.widths.push(block.ncols());
            self.last = block;
        }
        self.solve_reduced()
    }

    /// Two Gram-Schmidt passes against `U`, then within the block.
    fn orthonormalize(&self, w: &CMat) -> CMat {
        let mut kept: Vec<crate::CVec> = Vec::new();
        for c in 0..w.ncols() {
            let mut x = w.column(c).into_owned();
            let x0 = x.norm();
            for _ in 0..2 {
                if self.u.ncols() > 0 {
                    let h = self.u.adjoint() * &x;
                    x -= &self.u * h;
                }
                for q in &kept {
                    let h = q.dotc(&x);
                    x.axpy(-h, q, cr(1.0));
                }
            }
            let xn = x.norm();
            if xn > BASIS_DEFLATION_TOL * x0 && xn > 0.0 {
                kept.push(x / cr(xn));
            }
        }
        let mut out = CMat::zeros(w.nrows(), kept.len());
        for (j, q) in kept.iter().enumerate() {
            out.set_column(j, q);
        }
        out
    }

    fn solve_reduced(&mut self) -> Result<()> {
        if self.u.ncols() == 0 {
            self.y = CMat::zeros(0, 0);
            return Ok(());
        }
        let (a, f, g) = self.projected();
        let y = solve_care_dense(&DenseCare::new(a, f, g)).map_err(|e| match e {
            Error::NoStabilizingSolution(s) => Error::NoStabilizingSolution(format!("reduced equation of order {}: {s}", self.dim())),
            Error::ImaginaryAxisEigenvalue { value } => Error::NoStabilizingSolution(format!(
                "reduced equation of order {} has a Hamiltonian eigenvalue {value} on the imaginary axis",
                self.dim()
            )),
            other => other,
        })?;
        self.y = y;
        Ok(())
    }

    /// `||U^* R U||_F` of the reduced equation; zero up to rounding.
    pub fn galerkin_defect(&self) -> f64 {
        if self.u.ncols() == 0 {
            return 0.0;
        }
        let (a, f, g) = self.projected();
        DenseCare::new(a, f, g).residual(&self.y).norm()
    }

    /// `||A^*X + XA - XFX + C^*C||_F` for `X = U Y U^*`.
    pub fn residual_norm(&self) -> f64 {
        if self.u.ncols() == 0 {
            return self.qr.sandwich_norm(&linalg::identity(self.p));
        }
        let bf = &self.bu * &self.y;
        let yfy = bf.adjoint() * &bf;
        self.qr.sandwich_norm(&residual_middle(self.p, &self.widths, &self.y, &yfy))
    }

    /// Eigenvalues of `U^*AU` (plain) or `U^*(A - BB^*X)U` (stabilized).
    pub fn ritz_values(&self, mode: AdaptiveMode) -> Result<Vec<C64>> {
        let (a, f, _) = self.projected();
        let m = match mode {
            AdaptiveMode::Plain => a,
            AdaptiveMode::Stabilized => &a - f * &self.y,
        };
        linalg::eigenvalues(&m)
    }

    pub fn solution(&self) -> LowRankSolution {
        LowRankSolution {
            v: self.u.clone(),
            middle: Middle::Direct(self.y.clone()),
            compressed: None,
            shifts: self.poles.clone(),
        }
    }
}

/// Result of a Galerkin solve.
#[derive(Debug, Clone)]
pub struct RksmOutcome {
    pub solution: LowRankSolution,
    pub history: ConvergenceHistory,
    /// Poles in the order used.
    pub poles: Vec<C64>,
    /// Poles that reused the previous one for lack of an admissible Ritz value.
    pub fallbacks: usize,
}

pub fn rksm_solve(
    problem: &CareProblem,
    strategy: &PoleStrategy,
    opts: &RksmOptions,
) -> core::result::Result<RksmOutcome, SolveFailure> {
    rksm_solve_with_clock(problem, strategy, opts, &NoClock)
}

pub fn rksm_solve_with_clock(
    problem: &CareProblem,
    strategy: &PoleStrategy,
    opts: &RksmOptions,
    clock: &dyn Clock,
) -> core::result::Result<RksmOutcome, SolveFailure> {
    let mut history = ConvergenceHistory::new();
    let fail = |error: Error, mut history: ConvergenceHistory| {
        history.status = SolveStatus::Breakdown;
        SolveFailure { error, history }
    };
    if let Err(e) = opts.validate() {
        return Err(SolveFailure { error: e, history });
    }
    let mut state = match RksmState::new(problem) {
        Ok(s) => s,
        Err(e) => return Err(SolveFailure { error: e, history }),
    };
    let region = match strategy {
        PoleStrategy::Adaptive { region: Some(r), .. } => Some(*r),
        PoleStrategy::Adaptive { region: None, .. } => match AdaptiveRegion::estimate(problem, opts.region_steps) {
            Ok(r) => Some(r),
            Err(e) => return Err(fail(e, history)),
        },
        PoleStrategy::Precomputed(_) => None,
    };
    let g_norm = problem.g_norm();
    let t0 = clock.seconds();
    let mut fallbacks = 0;
    let mut pending_conj: Option<C64> = None;
    for it in 1..=opts.max_iter {
        let pole = match strategy {
            PoleStrategy::Precomputed(seq) => seq.cyclic(it - 1),
            PoleStrategy::Adaptive { mode, .. } => {
                if let Some(c) = pending_conj.take() {
                    c
                } else if it == 1 {
                    cr(region.expect("set for adaptive strategies").s_min)
                } else {
                    let next = state
                        .ritz_values(*mode)
                        .and_then(|ritz| next_adaptive_pole(&ritz, state.poles(), region.as_ref()));
                    match next {
                        Ok(p) => {
                            if p.fallback {
                                fallbacks += 1;
                            }
                            if p.pole.im != 0.0 {
                                pending_conj = Some(p.pole.conj());
                            }
                            p.pole
                        }
                        Err(e) => return Err(fail(e, history)),
                    }
                }
            }
        };
        if let Err(e) = state.expand(problem, pole) {
            return Err(fail(e, history));
        }
        let res = state.residual_norm();
        let rel = if g_norm > 0.0 { res / g_norm } else { res };
        history.push(IterationRecord {
            iter: it,
            dim: state.dim(),
            rank: state.dim(),
            rel_residual: rel,
            seconds: clock.seconds() - t0,
        });
        if rel <= opts.tol {
            history.status = SolveStatus::Converged;
            break;
        }
    }
    let solution = crate::ilrsi::truncate_basis(&state.solution(), opts.truncation_tol);
    Ok(RksmOutcome { solution, history, poles: state.poles, fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use crate::RMat;

    fn scalar() -> CareProblem {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
        CareProblem::new(a, RMat::from_element(1, 1, 1.0), RMat::from_element(1, 1, libm::sqrt(3.0)), None).unwrap()
    }

    #[test]
    fn scalar_one_step_is_exact() {
        let p = scalar();
        let mut s = RksmState::new(&p).unwrap();
        s.expand(&p, cr(2.0)).unwrap();
        let x = s.solution().to_dense().unwrap();
        assert!((x[(0, 0)] - cr(1.0)).norm() < 1e-12);
        assert!(s.residual_norm() < 1e-12);
    }

    #[test]
    fn basis_stays_orthonormal_and_galerkin_holds() {
        let p = crate::problem::random_stable_problem(30, 2, 2, 5).unwrap();
        let mut s = RksmState::new(&p).unwrap();
        for &a in &[cr(0.5), C64::new(1.0, 2.0), C64::new(1.0, -2.0), cr(5.0)] {
            s.expand(&p, a).unwrap();
        }
        let u = s.u();
        assert!((u.adjoint() * u - linalg::identity(u.ncols())).norm() < 1e-12);
        assert!(s.galerkin_defect() <= 1e-10 * p.g_norm());
    }

    #[test]
    fn residual_matches_dense_assembly() {
        let p = crate::problem::random_stable_problem(25, 2, 1, 11).unwrap();
        let mut s = RksmState::new(&p).unwrap();
        for &a in &[cr(0.3), cr(2.0), cr(7.0)] {
            s.expand(&p, a).unwrap();
        }
        let x = s.solution().to_dense().unwrap();
        let dense = crate::dense::problem_residual(&p, &x).norm();
        assert!((s.residual_norm() - dense).abs() <= 1e-10 * dense);
    }

    #[test]
    fn repeated_pole_on_invariant_space_deflates() {
        let p = scalar();
        let mut s = RksmState::new(&p).unwrap();
        s.expand(&p, cr(2.0)).unwrap();
        s.expand(&p, cr(3.0)).unwrap();
        assert_eq!((s.dim(), s.deflated()), (1, 1));
    }

    #[test]
    fn generalized_problem_is_rejected() {
        let p = crate::problem::random_stable_problem(4, 1, 1, 2).unwrap();
        let e = SparseMatrix::identity(4);
        let pe = CareProblem::new(p.a().clone(), p.b().clone(), p.c().clone(), Some(e)).unwrap();
        assert!(matches!(RksmState::new(&pe), Err(Error::Unsupported(_))));
    }
}
