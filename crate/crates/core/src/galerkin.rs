//! Diagnostics on the distinct-pole basis `V = [(-A^*+alpha_1)^{-1}C^*, ..., (-A^*+alpha_k)^{-1}C^*]`,
//! which links the subspace iteration with Galerkin projection.

use alloc::format;
use alloc::vec::Vec;

use crate::banded::ShiftedSolver;
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};
use crate::problem::CareProblem;

/// Basis, small matrix and projected quantities for pairwise distinct shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctShiftBasisData {
    pub v: CMat,
    /// Built by the shift-by-shift recursion; `X_k = V T^{-1} V^*`.
    pub t: CMat,
    pub shifts: Vec<C64>,
    pub p: usize,
    /// `V^* F V`.
    pub vfv: CMat,
    /// `(V^*V)^{-1} V^* C^*`.
    pub g: CMat,
    /// `(V^*V)^{-1} V^* A^* V`.
    pub k: CMat,
    /// `V^* C^*`, kept for the Galerkin residual.
    pub vc: CMat,
    /// `V^* V`.
    pub gram: CMat,
}

impl DistinctShiftBasisData {
    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    /// `Lambda = diag(alpha_1, ..., alpha_k) (x) I_p`.
    pub fn lambda(&self) -> CMat {
        let d = CMat::from_diagonal(&crate::CVec::from_vec(self.shifts.clone()));
        linalg::kron_identity(&d, self.p)
    }

    /// `1 = [1, ..., 1]^T (x) I_p`, a `kp x p` block.
    pub fn ones(&self) -> CMat {
        linalg::kron_identity(&CMat::from_element(self.shifts.len(), 1, cr(1.0)), self.p)
    }
}

fn check_distinct(shifts: &[C64]) -> Result<()> {
    for (i, a) in shifts.iter().enumerate() {
        if !(a.re > 0.0) {
            return Err(Error::InvalidArgument { what: "shifts", reason: format!("shift {i} = {a} is not in the right half-plane") });
        }
        for (j, b) in shifts.iter().enumerate().skip(i + 1) {
            if (*a - *b).norm() <= 1e-12 * a.norm().max(b.norm()) {
                return Err(Error::RepeatedShift { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// `Q_k^{-1} = -2 a_k [[D^{-1}, 0], [-1^T D^{-1}, 1]]`, `D = diag(alpha_k - alpha_s)`.
pub fn distinct_q_inverse(alphas: &[C64]) -> CMat {
    let k = alphas.len();
    let ak = alphas[k - 1];
    let c = cr(-2.0 * ak.re);
    let mut q = CMat::zeros(k, k);
    for s in 0..k - 1 {
        let dinv = cr(1.0) / (ak - alphas[s]);
        q[(s, s)] = c * dinv;
        q[(k - 1, s)] = -c * dinv;
    }
    q[(k - 1, k - 1)] = c;
    q
}

/// Closed form of `P_k^{-1}`: diagonal `(alpha_s - alpha_k)/(alpha_s + conj(alpha_k))`,
/// last row `-1/(alpha_s + conj(alpha_k))`, corner `-1/(2 a_k)`.
pub fn distinct_p_inverse(alphas: &[C64]) -> CMat {
    let k = alphas.len();
    let ak = alphas[k - 1];
    let mut p = CMat::zeros(k, k);
    for s in 0..k - 1 {
        let den = alphas[s] + ak.conj();
        p[(s, s)] = (alphas[s] - ak) / den;
        p[(k - 1, s)] = -cr(1.0) / den;
    }
    p[(k - 1, k - 1)] = cr(-1.0 / (2.0 * ak.re));
    p
}

/// Assembles the basis and runs the recursion
/// `T_k = P^{-*}(blkdiag(T_{k-1}, 2a_k I) + Q^{-*} V^*FV Q^{-1} / (2a_k)) P^{-1}`.
pub fn build_distinct_basis(problem: &CareProblem, shifts: &[C64]) -> Result<DistinctShiftBasisData> {
    if problem.e().is_some() {
        return Err(Error::Unsupported("the distinct-pole basis requires E = I".into()));
    }
    if shifts.is_empty() {
        return Err(Error::InvalidArgument { what: "shifts", reason: "empty shift list".into() });
    }
    check_distinct(shifts)?;
    let p = problem.p();
    let n = problem.n();
    let k = shifts.len();
    let mut solver = ShiftedSolver::new(problem.a(), None);
    let c_adj = problem.c_adj();
    let mut v = CMat::zeros(n, k * p);
    for (i, &a) in shifts.iter().enumerate() {
        v.columns_mut(i * p, p).copy_from(&solver.solve(a, &c_adj)?);
    }
    let bv = problem.apply_b_adj(&v);
    let vfv = bv.adjoint() * &bv;

    let mut t = CMat::zeros(0, 0);
    for j in 1..=k {
        let alphas = &shifts[..j];
        let a = alphas[j - 1].re;
        let qinv = linalg::kron_identity(&distinct_q_inverse(alphas), p);
        let mut pm = qinv.clone();
        for i in 0..(j - 1) * p {
            pm[(i, i)] += cr(1.0);
        }
        let bq = bv.columns(0, j * p) * &qinv;
        let z = linalg::block_diag(&t, &(linalg::identity(p) * cr(2.0 * a))) + (bq.adjoint() * bq) * cr(1.0 / (2.0 * a));
        let left = linalg::lu_solve(&pm.adjoint(), &z, "P_k")?;
        t = linalg::hermitian_part(&linalg::lu_solve(&pm.adjoint(), &left.adjoint(), "P_k")?.adjoint());
    }

    let qr = v.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let g = upper_solve(&r, &(q.adjoint() * &c_adj))?;
    let k_mat = upper_solve(&r, &(q.adjoint() * problem.apply_a_adj(&v)))?;
    let vc = v.adjoint() * &c_adj;
    let gram = v.adjoint() * &v;
    Ok(DistinctShiftBasisData { v, t, shifts: shifts.to_vec(), p, vfv, g, k: k_mat, vc, gram })
}

fn upper_solve(r: &CMat, b: &CMat) -> Result<CMat> {
    r.solve_upper_triangular(b).ok_or(Error::Singular { what: "R factor of V" })
}

/// `||Lambda^* T + T Lambda - V^*FV - 1 1^*||_F`.
pub fn check_sylvester_identity(data: &DistinctShiftBasisData) -> f64 {
    let l = data.lambda();
    let one = data.ones();
    (l.adjoint() * &data.t + &data.t * &l - &data.vfv - &one * one.adjoint()).norm()
}

/// `T(i, j) = (I + V_i^* F V_j) / (conj(alpha_i) + alpha_j)` blockwise.
pub fn closed_form_t(data: &DistinctShiftBasisData) -> CMat {
    let p = data.p;
    let k = data.shifts.len();
    let mut t = data.vfv.clone();
    for bi in 0..k {
        for bj in 0..k {
            let den = data.shifts[bi].conj() + data.shifts[bj];
            for r in 0..p {
                for c in 0..p {
                    let (i, j) = (bi * p + r, bj * p + c);
                    let id = if r == c { cr(1.0) } else { cr(0.0) };
                    t[(i, j)] = (id + data.vfv[(i, j)]) / den;
                }
            }
        }
    }
    t
}

/// Largest entrywise relative gap between the recursion and the closed form.
/// Entries below `1e-12 max|T|` are compared on that absolute scale.
pub fn check_entrywise_t(data: &DistinctShiftBasisData) -> f64 {
    let closed = closed_form_t(data);
    let floor = 1e-12 * closed.iter().map(|z| z.norm()).fold(0.0, f64::max);
    data.t
        .iter()
        .zip(closed.iter())
        .map(|(a, b)| (*a - *b).norm() / b.norm().max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Galerkin quantities on the span of `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalerkinReport {
    /// `||g - T^{-1} 1||_F`.
    pub defect: f64,
    /// `||V^* R V||_F` with `R` the residual of `X = V T^{-1} V^*`.
    pub vrv: f64,
}

/// Uses `R = (C^* - V T^{-1} 1)(C^* - V T^{-1} 1)^*`, so
/// `V^* R V = w w^*` with `w = V^*C^* - V^*V T^{-1} 1`.
pub fn galerkin_defect(data: &DistinctShiftBasisData) -> Result<GalerkinReport> {
    let tinv_one = linalg::lu_solve(&data.t, &data.ones(), "T")?;
    let defect = (&data.g - &tinv_one).norm();
    let w = &data.vc - &data.gram * &tinv_one;
    let vrv = (&w * w.adjoint()).norm();
    Ok(GalerkinReport { defect, vrv })
}

/// `||Lambda^* T + T K - V^*FV||_F`.
pub fn ritz_condition_defect(data: &DistinctShiftBasisData) -> f64 {
    (data.lambda().adjoint() * &data.t + &data.t * &data.k - &data.vfv).norm()
}

/// `-conj(lambda)` for the eigenvalues `lambda` of `K - T^{-1} V^*FV`.
pub fn mirrored_ritz_values(data: &DistinctShiftBasisData) -> Result<Vec<C64>> {
    let m = &data.k - linalg::lu_solve(&data.t, &data.vfv, "T")?;
    Ok(linalg::eigenvalues(&m)?.into_iter().map(|l| -l.conj()).collect())
}

/// Outcome of the search for poles equal to their own mirrored Ritz values.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointPoles {
    pub poles: Vec<C64>,
    pub data: DistinctShiftBasisData,
    pub iterations: usize,
    /// Final `ritz_condition_defect / ||V^*FV + 1 1^*||_F`.
    pub relative_defect: f64,
}

fn sort_poles(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
}

/// Iterates `alpha <- mirrored_ritz_values(alpha)` (p = 1) until the Ritz condition
/// holds to `tol` relative.
pub fn mirrored_ritz_fixed_point(problem: &CareProblem, initial: &[C64], max_iter: usize, tol: f64) -> Result<FixedPointPoles> {
    let mut poles = initial.to_vec();
    sort_poles(&mut poles);
    let mut data = build_distinct_basis(problem, &poles)?;
    for it in 0..=max_iter {
        let one = data.ones();
        let scale = (&data.vfv + &one * one.adjoint()).norm();
        let rel = ritz_condition_defect(&data) / scale;
        if rel <= tol {
            return Ok(FixedPointPoles { poles, data, iterations: it, relative_defect: rel });
        }
        if it == max_iter {
            break;
        }
        let mut next = mirrored_ritz_values(&data)?;
        if next.iter().any(|z| !(z.re > 0.0)) {
            return Err(Error::NoConvergence { what: "mirrored Ritz fixed point (pole left the right half-plane)" });
        }
        sort_poles(&mut next);
        poles = next;
        data = build_distinct_basis(problem, &poles)?;
    }
    Err(Error::NoConvergence { what: "mirrored Ritz fixed point" })
}

/// Leading singular values of the dense residual and the gap to its factored form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRankReport {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `||R - (C^* - V T^{-1} 1)(C^* - V T^{-1} 1)^*||_F / ||R||_F`.
    pub factored_gap: f64,
}

pub fn residual_rank_diagnostic(problem: &CareProblem, data: &DistinctShiftBasisData) -> Result<ResidualRankReport> {
    let tinv_v = linalg::lu_solve(&data.t, &data.v.adjoint(), "T")?;
    let x = linalg::hermitian_part(&(&data.v * tinv_v));
    let r = crate::dense::problem_residual(problem, &x);
    let sv = linalg::singular_values(&r);
    let f = problem.c_adj() - &data.v * linalg::lu_solve(&data.t, &data.ones(), "T")?;
    let fact = &f * f.adjoint();
    let nrm = r.norm();
    let factored_gap = if nrm > 0.0 { (&r - fact).norm() / nrm } else { fact.norm() };
    Ok(ResidualRankReport {
        sigma1: sv.first().copied().unwrap_or(0.0),
        sigma2: sv.get(1).copied().unwrap_or(0.0),
        factored_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use crate::RMat;

    #[test]
    fn p_inverse_closed_form_matches_solve() {
        let alphas = [C64::new(1.0, 0.5), cr(2.0), C64::new(0.3, -1.0), cr(4.0)];
        let qinv = distinct_q_inverse(&alphas);
        let mut p = qinv.clone();
        for i in 0..3 {
            p[(i, i)] += cr(1.0);
        }
        let inv = linalg::inverse(&p, "P").unwrap();
        assert!(linalg::rel_diff(&inv, &distinct_p_inverse(&alphas)) < 1e-13);
        // Q^{-1} P^{-1} = diag(2 a_k / (alpha_s + conj(alpha_k)), ..., 1)
        let prod = &qinv * &inv;
        let ak = alphas[3];
        for s in 0..3 {
            assert!((prod[(s, s)] - cr(2.0 * ak.re) / (alphas[s] + ak.conj())).norm() < 1e-13);
        }
        assert!((prod[(3, 3)] - cr(1.0)).norm() < 1e-13);
    }

    #[test]
    fn lyapunov_case_is_cauchy() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, -1.0), (1, 1, -2.0), (2, 2, -3.0), (0, 1, 0.5)]).unwrap();
        let p = CareProblem::new(a, RMat::zeros(3, 1), RMat::from_row_slice(1, 3, &[1.0, 2.0, -1.0]), None).unwrap();
        let d = build_distinct_basis(&p, &[cr(1.0), cr(2.0)]).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[cr(0.5), cr(1.0 / 3.0), cr(1.0 / 3.0), cr(0.25)]);
        assert!((&d.t - expect).norm() < 1e-14);
        assert!(check_sylvester_identity(&d) < 1e-14);
    }

    #[test]
    fn first_block_formula() {
        let p = crate::problem::random_stable_problem(9, 1, 2, 8).unwrap();
        let d = build_distinct_basis(&p, &[cr(1.7)]).unwrap();
        let expect = (cr(1.0) + d.vfv[(0, 0)]) / cr(3.4);
        assert!((d.t[(0, 0)] - expect).norm() < 1e-14 * expect.norm());
    }

    #[test]
    fn repeated_shift_is_rejected() {
        let p = crate::problem::random_stable_problem(5, 1, 1, 1).unwrap();
        let err = build_distinct_basis(&p, &[cr(1.0), cr(2.0), cr(1.0)]).unwrap_err();
        assert_eq!(err, Error::RepeatedShift { first: 0, second: 2 });
    }
}
