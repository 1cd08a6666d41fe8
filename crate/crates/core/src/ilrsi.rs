//! Incremental low-rank subspace iteration.
//!
//! The iterate is kept as `X_k = V_k T_k^{-1} V_k^*` where `V_k = [v_1, ..., v_k]`
//! grows by one block of `p` columns per step and `T_k` is small and Hermitian.

use alloc::vec::Vec;

use crate::banded::ShiftedSolver;
use crate::error::{Error, Result};
use crate::history::{Clock, ConvergenceHistory, IterationRecord, NoClock, SolveStatus};
use crate::linalg::{self, cr, CMat, C64};
use crate::problem::CareProblem;
use crate::residual::IncrementalQr;
use crate::shifts::{ShiftOrigin, ShiftSequence};

/// Relative Hermitian drift of `T_k` treated as a numerical breakdown.
pub const HERMITIAN_DRIFT_TOL: f64 = 1e-10;

/// Small middle factor of a low-rank solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Middle {
    /// `X = V T^{-1} V^*`.
    Inverse(CMat),
    /// `X = V Y V^*`.
    Direct(CMat),
}

/// Low-rank representation of an approximate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankSolution {
    pub v: CMat,
    pub middle: Middle,
    /// `(W, R)` with orthonormal `W` and `V ~ W R` up to the truncation tolerance.
    pub compressed: Option<(CMat, CMat)>,
    /// Shifts or poles consumed, in order.
    pub shifts: Vec<C64>,
}

impl LowRankSolution {
    /// The zero matrix of order `n`.
    pub fn zero(n: usize) -> Self {
        Self { v: CMat::zeros(n, 0), middle: Middle::Direct(CMat::zeros(0, 0)), compressed: None, shifts: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// Number of basis columns.
    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn t(&self) -> Option<&CMat> {
        match &self.middle {
            Middle::Inverse(t) => Some(t),
            Middle::Direct(_) => None,
        }
    }

    /// `Y` with `X = V Y V^*`.
    pub fn middle_y(&self) -> Result<CMat> {
        match &self.middle {
            Middle::Direct(y) => Ok(y.clone()),
            Middle::Inverse(t) => {
                let y = linalg::hermitian_solve(t, &linalg::identity(t.nrows()), "T")
                    .map_err(|_| Error::SingularT { dim: t.nrows() })?;
                Ok(linalg::hermitian_part(&y))
            }
        }
    }

    /// `X x`.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if self.dim() == 0 {
            return Ok(CMat::zeros(self.n(), x.ncols()));
        }
        let vx = self.v.adjoint() * x;
        let mid = match &self.middle {
            Middle::Direct(y) => y * vx,
            Middle::Inverse(t) => {
                linalg::hermitian_solve(t, &vx, "T").map_err(|_| Error::SingularT { dim: t.nrows() })?
            }
        };
        Ok(&self.v * mid)
    }

    pub fn to_dense(&self) -> Result<CMat> {
        self.apply(&linalg::identity(self.n()))
    }

    /// The consumed shifts as a conjugation-closed sequence.
    pub fn shift_log(&self, origin: ShiftOrigin) -> Result<ShiftSequence> {
        ShiftSequence::closing(self.shifts.clone(), origin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlrsiOptions {
    /// Stop when `||R_k||_F / ||C^* C||_F <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative singular-value threshold for the reported rank and compression.
    pub truncation_tol: f64,
    /// Evaluate the residual every this many iterations (and at the last one).
    pub residual_every: usize,
}

impl Default for IlrsiOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, truncation_tol: 1e-12, residual_every: 1 }
    }
}

impl IlrsiOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument { what: "tol", reason: "must be positive".into() });
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol < 1.0) {
            return Err(Error::InvalidArgument { what: "truncation_tol", reason: "must lie in (0, 1)".into() });
        }
        if self.residual_every == 0 {
            return Err(Error::InvalidArgument { what: "residual_every", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Middle matrix of `||[C^*, A^*V, E^*V] M [C^*, A^*V, E^*V]^*||_F` for columns
/// ordered `[C^*, A^*v_1, E^*v_1, A^*v_2, E^*v_2, ...]` with block widths `widths`.
pub(crate) fn residual_middle(p: usize, widths: &[usize], y: &CMat, yfy: &CMat) -> CMat {
    let k: usize = widths.iter().sum();
    let size = p + 2 * k;
    let mut m = CMat::zeros(size, size);
    for i in 0..p {
        m[(i, i)] = cr(1.0);
    }
    // start of the A^* block of block b, and the offset of b inside V
    let mut a_pos = Vec::with_capacity(widths.len());
    let mut v_pos = Vec::with_capacity(widths.len());
    let (mut pos, mut off) = (p, 0);
    for &w in widths {
        a_pos.push(pos);
        v_pos.push(off);
        pos += 2 * w;
        off += w;
    }
    for (bi, &wi) in widths.iter().enumerate() {
        for (bj, &wj) in widths.iter().enumerate() {
            for r in 0..wi {
                for c in 0..wj {
                    let (vi, vj) = (v_pos[bi] + r, v_pos[bj] + c);
                    let (ai, aj) = (a_pos[bi] + r, a_pos[bj] + c);
                    let (ei, ej) = (ai + wi, aj + wj);
                    m[(ai, ej)] = y[(vi, vj)];
                    m[(ei, aj)] = y[(vi, vj)];
                    m[(ei, ej)] = -yfy[(vi, vj)];
                }
            }
        }
    }
    m
}

/// Columns `[A^* w, E^* w]` appended to the residual QR for a new block `w`.
pub(crate) fn residual_columns(problem: &CareProblem, w: &CMat) -> CMat {
    linalg::hstack(&problem.apply_a_adj(w), &problem.apply_e_adj(w))
}

/// Loop state of the incremental iteration.
#[derive(Debug, Clone)]
pub struct IlrsiState {
    v: CMat,
    t: CMat,
    last: CMat,
    shifts: Vec<C64>,
    /// `B^* V`.
    bv: CMat,
    qr: IncrementalQr,
    vqr: IncrementalQr,
    solver: ShiftedSolver,
    p: usize,
}

impl IlrsiState {
    /// First step: `v_1 = -2 a_1 (-A^* + alpha_1 E^*)^{-1} C^*`.
    pub fn init(problem: &CareProblem, alpha: C64) -> Result<Self> {
        check_shift(alpha)?;
        let mut solver = ShiftedSolver::new(problem.a(), problem.e());
        let c_adj = problem.c_adj();
        let a = alpha.re;
        let v1 = solver.solve(alpha, &c_adj)? * cr(-2.0 * a);
        let bv = problem.apply_b_adj(&v1);
        let p = problem.p();
        let t = linalg::identity(p) * cr(2.0 * a) + (bv.adjoint() * &bv) * cr(1.0 / (2.0 * a));
        let mut qr = IncrementalQr::new();
        qr.push_columns(&c_adj);
        qr.push_columns(&residual_columns(problem, &v1));
        let mut vqr = IncrementalQr::new();
        vqr.push_columns(&v1);
        Ok(Self {
            v: v1.clone(),
            t: linalg::hermitian_part(&t),
            last: v1,
            shifts: alloc::vec![alpha],
            bv,
            qr,
            vqr,
            solver,
            p,
        })
    }

    /// Steps taken so far.
    pub fn k(&self) -> usize {
        self.shifts.len()
    }

    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn t(&self) -> &CMat {
        &self.t
    }

    /// The most recent block `v_k`.
    pub fn last_block(&self) -> &CMat {
        &self.last
    }

    pub fn qr(&self) -> &IncrementalQr {
        &self.qr
    }

    /// Cached shifted factorizations.
    pub fn factorizations(&self) -> usize {
        self.solver.factorizations()
    }

    pub fn step(&mut self, problem: &CareProblem, alpha: C64) -> Result<()> {
        check_shift(alpha)?;
        let prev = *self.shifts.last().expect("initialized state");
        let a = alpha.re;
        let w = self.solver.solve(alpha, &problem.apply_e_adj(&self.last))?;
        let v = (&self.last - w * (alpha + prev.conj())) * cr(a / prev.re);
        self.shifts.push(alpha);
        let k = self.shifts.len();
        let p = self.p;

        self.v = linalg::hstack(&self.v, &v);
        self.bv = linalg::hstack(&self.bv, &problem.apply_b_adj(&v));
        self.qr.push_columns(&residual_columns(problem, &v));
        self.vqr.push_columns(&v);

        let qinv = linalg::kron_identity(&nested_q_inverse(&self.shifts), p);
        let mut pm = qinv.clone();
        for i in 0..(k - 1) * p {
            pm[(i, i)] += cr(1.0);
        }
        let bq = &self.bv * &qinv;
        let z = linalg::block_diag(&self.t, &(linalg::identity(p) * cr(2.0 * a)))
            + (bq.adjoint() * bq) * cr(1.0 / (2.0 * a));
        // T = P^{-*} Z P^{-1}
        let left = linalg::lu_solve(&pm.adjoint(), &z, "P_k")?;
        let t = linalg::lu_solve(&pm.adjoint(), &left.adjoint(), "P_k")?.adjoint();
        let nrm = t.norm();
        let drift = if nrm > 0.0 { linalg::hermitian_defect(&t) / nrm } else { 0.0 };
        if drift > HERMITIAN_DRIFT_TOL {
            return Err(Error::HermitianDrift { step: k, drift });
        }
        if drift > 1e-13 {
            log::debug!("T_{k} symmetrized, relative drift {drift:e}");
        }
        self.t = linalg::hermitian_part(&t);
        self.last = v;
        Ok(())
    }

    /// `||A^* X E + E^* X A - E^* X F X E + C^* C||_F` from the R factor of
    /// `[C^*, A^*V, E^*V]`.
    pub fn residual_norm(&self) -> Result<f64> {
        let y = linalg::hermitian_solve(&self.t, &linalg::identity(self.t.nrows()), "T")
            .map_err(|_| Error::SingularT { dim: self.t.nrows() })?;
        let y = linalg::hermitian_part(&y);
        let vfv = self.bv.adjoint() * &self.bv;
        let yfy = &y * vfv * &y;
        let widths = alloc::vec![self.p; self.k()];
        Ok(self.qr.sandwich_norm(&residual_middle(self.p, &widths, &y, &yfy)))
    }

    /// Numerical rank of `V` at relative threshold `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        numerical_rank(&linalg::singular_values(&self.vqr.r_factor()), tol)
    }

    pub fn solution(&self) -> LowRankSolution {
        LowRankSolution {
            v: self.v.clone(),
            middle: Middle::Inverse(self.t.clone()),
            compressed: None,
            shifts: self.shifts.clone(),
        }
    }
}

fn check_shift(alpha: C64) -> Result<()> {
    if !(alpha.re > 0.0) || !alpha.im.is_finite() {
        return Err(Error::InvalidArgument {
            what: "shift",
            reason: alloc::format!("{alpha} does not have a positive real part"),
        });
    }
    Ok(())
}

pub(crate) fn numerical_rank(sv: &[f64], tol: f64) -> usize {
    match sv.first() {
        Some(&s1) if s1 > 0.0 => sv.iter().filter(|&&s| s > tol * s1).count(),
        _ => 0,
    }
}

/// `Q_k^{-1}` for the nested basis, from the factors `Q_k = Qhat * Qones * Qlow`:
/// a cyclic permutation, the upper triangular matrix of ones and a lower
/// bidiagonal matrix built from the shifts.
pub fn nested_q_inverse(alphas: &[C64]) -> CMat {
    let k = alphas.len();
    let ak = alphas[k - 1];
    let two_a = 2.0 * ak.re;
    // Qhat^T: (i+1, i) = 1, (0, k-1) = 1
    let mut m = CMat::zeros(k, k);
    for i in 0..k - 1 {
        m[(i + 1, i)] = cr(1.0);
    }
    m[(0, k - 1)] = cr(1.0);
    // Qones^{-1} = I - superdiagonal
    let mut rows = m.clone();
    for i in 0..k - 1 {
        let next = m.row(i + 1).into_owned();
        let cur = rows.row(i) - next;
        rows.set_row(i, &cur);
    }
    // Qlow^{-1} by forward substitution
    let diag: Vec<C64> = (0..k)
        .map(|s| if s + 1 == k { cr(1.0) } else { (alphas[s].conj() + ak) / two_a })
        .collect();
    let sub: Vec<C64> = (0..k - 1).map(|s| (alphas[s] - ak) / two_a).collect();
    let mut out = CMat::zeros(k, k);
    for i in 0..k {
        let mut r = rows.row(i).into_owned();
        if i > 0 {
            r -= out.row(i - 1) * sub[i - 1];
        }
        out.set_row(i, &(r / diag[i]));
    }
    out
}

/// One step of the generic recursion on `X_{k-1} = U T^{-1} U^*`:
/// `U_k = [(-A^*+alpha E^*)^{-1}(-A^* - conj(alpha) E^*) U, -2a (-A^*+alpha E^*)^{-1} C^*]`
/// and `T_k = blkdiag(T, 2a I) + 2a W^* W` with
/// `W = B^* (-A^*+alpha E^*)^{-1} [E^* U, C^*]`.
pub fn lrsi_reference_step(
    problem: &CareProblem,
    solver: &mut ShiftedSolver,
    u: &CMat,
    t: &CMat,
    alpha: C64,
) -> Result<(CMat, CMat)> {
    check_shift(alpha)?;
    if u.ncols() != t.nrows() || t.nrows() != t.ncols() || u.nrows() != problem.n() {
        return Err(Error::DimensionMismatch {
            first: "U",
            second: "T",
            detail: alloc::format!("U is {}x{}, T is {}x{}", u.nrows(), u.ncols(), t.nrows(), t.ncols()),
        });
    }
    let a = alpha.re;
    let rhs = linalg::hstack(&problem.apply_e_adj(u), &problem.c_adj());
    let s = solver.solve(alpha, &rhs)?;
    let m = u.ncols();
    let su = s.columns(0, m).into_owned();
    let sc = s.columns(m, problem.p()).into_owned();
    // (-A^*+alpha E^*)^{-1}(-A^* - conj(alpha) E^*) U = U - 2a (-A^*+alpha E^*)^{-1} E^* U
    let first = u - su * cr(2.0 * a);
    let u_new = linalg::hstack(&first, &(sc * cr(-2.0 * a)));
    let w = problem.apply_b_adj(&s);
    let t_new = linalg::block_diag(t, &(linalg::identity(problem.p()) * cr(2.0 * a))) + (w.adjoint() * w) * cr(2.0 * a);
    Ok((u_new, linalg::hermitian_part(&t_new)))
}

/// Refreshes the compressed pair `V = W R` with `W` orthonormal and `R` of
/// numerical rank at relative threshold `truncation_tol`.
pub fn truncate_basis(solution: &LowRankSolution, truncation_tol: f64) -> LowRankSolution {
    let mut out = solution.clone();
    if solution.dim() == 0 {
        out.compressed = Some((CMat::zeros(solution.n(), 0), CMat::zeros(0, 0)));
        return out;
    }
    let qr = solution.v.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let svd = r.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = numerical_rank(&sv, truncation_tol);
    let mut w = CMat::zeros(solution.n(), rank);
    let mut rr = CMat::zeros(rank, solution.dim());
    for (c, &i) in idx.iter().take(rank).enumerate() {
        w.set_column(c, &(&q * u.column(i)));
        rr.set_row(c, &(vt.row(i) * cr(svd.singular_values[i])));
    }
    out.compressed = Some((w, rr));
    out
}

/// Residual of a low-rank solution, evaluated through a QR of `[C^*, A^*V, E^*V]`.
pub fn residual_norm(problem: &CareProblem, solution: &LowRankSolution) -> Result<f64> {
    if solution.dim() == 0 {
        return Ok(problem.g_norm());
    }
    let y = solution.middle_y()?;
    let bv = problem.apply_b_adj(&solution.v);
    let yfy = &y * (bv.adjoint() * bv) * &y;
    let mut qr = IncrementalQr::new();
    qr.push_columns(&problem.c_adj());
    let k = solution.dim();
    for j in 0..k {
        qr.push_columns(&residual_columns(problem, &solution.v.columns(j, 1).into_owned()));
    }
    Ok(qr.sandwich_norm(&residual_middle(problem.p(), &alloc::vec![1; k], &y, &yfy)))
}

/// A solve that stopped on an error, with the history recorded so far.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveFailure {
    pub error: Error,
    pub history: ConvergenceHistory,
}

impl core::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} (after {} recorded iterations)", self.error, self.history.len())
    }
}

impl core::error::Error for SolveFailure {}

/// Runs the incremental iteration, cycling `shifts`, until the relative residual
/// drops to `opts.tol` or `opts.max_iter` steps are taken.
pub fn ilrsi_solve(
    problem: &CareProblem,
    shifts: &ShiftSequence,
    opts: &IlrsiOptions,
) -> core::result::Result<(LowRankSolution, ConvergenceHistory), SolveFailure> {
    ilrsi_solve_with_clock(problem, shifts, opts, &NoClock)
}

pub fn ilrsi_solve_with_clock(
    problem: &CareProblem,
    shifts: &ShiftSequence,
    opts: &IlrsiOptions,
    clock: &dyn Clock,
) -> core::result::Result<(LowRankSolution, ConvergenceHistory), SolveFailure> {
    let mut history = ConvergenceHistory::new();
    let fail = |error: Error, mut history: ConvergenceHistory| {
        history.status = SolveStatus::Breakdown;
        SolveFailure { error, history }
    };
    if let Err(e) = opts.validate() {
        return Err(SolveFailure { error: e, history });
    }
    if opts.max_iter == 0 {
        return Ok((LowRankSolution::zero(problem.n()), history));
    }
    let g_norm = problem.g_norm();
    let t0 = clock.seconds();
    let mut state = match IlrsiState::init(problem, shifts.cyclic(0)) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, history)),
    };
    for it in 1..=opts.max_iter {
        if it > 1 {
            if let Err(e) = state.step(problem, shifts.cyclic(it - 1)) {
                return Err(fail(e, history));
            }
        }
        if it % opts.residual_every == 0 || it == opts.max_iter {
            let res = match state.residual_norm() {
                Ok(r) => r,
                Err(e) => return Err(fail(e, history)),
            };
            let rel = if g_norm > 0.0 { res / g_norm } else { res };
            history.push(IterationRecord {
                iter: it,
                dim: state.v.ncols(),
                rank: state.rank(opts.truncation_tol),
                rel_residual: rel,
                seconds: clock.seconds() - t0,
            });
            if rel <= opts.tol {
                history.status = SolveStatus::Converged;
                break;
            }
        }
    }
    Ok((truncate_basis(&state.solution(), opts.truncation_tol), history))
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
    fn scalar_first_step_is_exact() {
        let p = scalar();
        let s = IlrsiState::init(&p, cr(2.0)).unwrap();
        assert!((s.v()[(0, 0)].re + 4.0 * libm::sqrt(3.0) / 3.0).abs() < 1e-14);
        assert!((s.t()[(0, 0)].re - 16.0 / 3.0).abs() < 1e-14);
        let x = s.solution().to_dense().unwrap();
        assert!((x[(0, 0)] - cr(1.0)).norm() < 1e-12);
        assert!(s.residual_norm().unwrap() < 1e-12);
    }

    #[test]
    fn scalar_second_step_stays_exact() {
        let p = scalar();
        let mut s = IlrsiState::init(&p, cr(2.0)).unwrap();
        s.step(&p, cr(0.7)).unwrap();
        let x = s.solution().to_dense().unwrap();
        assert!((x[(0, 0)] - cr(1.0)).norm() < 1e-10);
        assert!(s.residual_norm().unwrap() < 1e-10);
    }

    #[test]
    fn zero_b_gives_diagonal_t() {
        let p = scalar().with_b(RMat::zeros(1, 1)).unwrap();
        let s = IlrsiState::init(&p, cr(3.0)).unwrap();
        assert_eq!(s.t()[(0, 0)], cr(6.0));
    }

    #[test]
    fn reference_step_from_empty_matches_init() {
        let p = crate::problem::random_stable_problem(10, 2, 1, 4).unwrap();
        let mut solver = ShiftedSolver::new(p.a(), None);
        let (u, t) = lrsi_reference_step(&p, &mut solver, &CMat::zeros(10, 0), &CMat::zeros(0, 0), cr(1.5)).unwrap();
        let s = IlrsiState::init(&p, cr(1.5)).unwrap();
        assert!((u - s.v()).norm() < 1e-14);
        assert!((t - s.t()).norm() < 1e-12 * s.t().norm());
        assert_eq!(s.t().shape(), (2, 2));
    }

    #[test]
    fn q_inverse_of_single_shift_is_one() {
        let q = nested_q_inverse(&[cr(2.0)]);
        assert_eq!(q, CMat::from_element(1, 1, cr(1.0)));
    }

    #[test]
    fn max_iter_zero_returns_zero() {
        let p = scalar();
        let shifts = ShiftSequence::from_real(&[2.0]).unwrap();
        let (sol, h) = ilrsi_solve(&p, &shifts, &IlrsiOptions { max_iter: 0, ..Default::default() }).unwrap();
        assert_eq!(sol.dim(), 0);
        assert!(h.is_empty());
        assert_eq!(h.status, SolveStatus::MaxIter);
        assert_eq!(residual_norm(&p, &sol).unwrap(), p.g_norm());
    }

    #[test]
    fn residual_middle_layout() {
        let y = CMat::from_fn(2, 2, |i, j| cr((1 + i + 2 * j) as f64));
        let yfy = CMat::from_fn(2, 2, |i, j| cr((10 + i + j) as f64));
        let m = residual_middle(1, &[1, 1], &y, &yfy);
        // order: C, A v1, E v1, A v2, E v2
        assert_eq!(m[(0, 0)], cr(1.0));
        assert_eq!(m[(1, 4)], y[(0, 1)]);
        assert_eq!(m[(4, 1)], y[(1, 0)]);
        assert_eq!(m[(2, 4)], -yfy[(0, 1)]);
        assert_eq!(m[(1, 3)], cr(0.0));
    }
}
