use alloc::format;

use super::DenseCare;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::problem::CareProblem;

/// Eigenvalues with `|Re| <= IMAG_AXIS_TOL * max(1, ||H||_F)` violate the splitting assumption.
const IMAG_AXIS_TOL: f64 = 1e-10;

/// `H = [A, -F; -G, -A^*]`.
pub fn hamiltonian(care: &DenseCare) -> CMat {
    let top = linalg::hstack(&care.a, &(-&care.f));
    let bot = linalg::hstack(&(-&care.g), &(-care.a.adjoint()));
    linalg::vstack(&top, &bot)
}

/// Complex Schur form `H = Q T Q^*` with the `n` stable eigenvalues leading.
pub fn ordered_hamiltonian_schur(h: &CMat) -> Result<(CMat, CMat)> {
    let n2 = h.nrows();
    let (mut q, mut t) = linalg::schur(h, "Hamiltonian")?;
    let tol = IMAG_AXIS_TOL * h.norm().max(1.0);
    for i in 0..n2 {
        if t[(i, i)].re.abs() <= tol {
            return Err(Error::ImaginaryAxisEigenvalue { value: t[(i, i)] });
        }
    }
    let stable = linalg::reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
    if 2 * stable != n2 {
        return Err(Error::NoStabilizingSolution(format!("{stable} stable eigenvalues out of {n2}")));
    }
    Ok((q, t))
}

/// Stabilizing solution `X = Q_21 Q_11^{-1}` from the stable invariant subspace.
pub fn solve_care_dense(care: &DenseCare) -> Result<CMat> {
    let n = care.n();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let (q, _) = ordered_hamiltonian_schur(&hamiltonian(care))?;
    let q11 = q.view((0, 0), (n, n)).into_owned();
    let q21 = q.view((n, 0), (n, n)).into_owned();
    // X = Q21 Q11^{-1}  <=>  Q11^* X^* = Q21^*
    let xt = linalg::lu_solve(&q11.adjoint(), &q21.adjoint(), "Q11")
        .map_err(|_| Error::NoStabilizingSolution("Q11 is singular".into()))?;
    let x = linalg::hermitian_part(&xt.adjoint());
    let closed = &care.a - &care.f * &x;
    let max_re = linalg::eigenvalues(&closed)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(Error::NoStabilizingSolution(format!("A - F X has an eigenvalue with real part {max_re}")));
    }
    let res = care.residual(&x).norm();
    let g = care.g.norm();
    if res > 1e-10 * g {
        log::debug!("dense CARE residual {res:e} exceeds 1e-10 ||G||_F = {:e}", 1e-10 * g);
    }
    Ok(x)
}

/// Stabilizing solution of the problem (`n` below the dense threshold).
pub fn dense_care_solve(problem: &CareProblem) -> Result<CMat> {
    solve_care_dense(&DenseCare::from_problem(problem)?)
}
