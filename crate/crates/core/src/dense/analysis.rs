use alloc::vec::Vec;

use super::care::{hamiltonian, ordered_hamiltonian_schur};
use super::DenseCare;
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};
use crate::shifts::rational_objective;

/// Largest block order for which `sep` is computed from the assembled Kronecker operator.
pub const SEP_EXACT_MAX: usize = 60;

const SEP_POWER_STEPS: usize = 50;

/// Ordered Schur data of the Hamiltonian matrix and the constants of the
/// subspace-iteration convergence bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianAnalysis {
    pub h: CMat,
    /// Unitary Schur factor, stable block first.
    pub q: CMat,
    pub t11: CMat,
    pub t12: CMat,
    pub t22: CMat,
    /// Solution of `T11 K - K T22 = -T12`.
    pub k: CMat,
    pub sep: f64,
    pub shifts: Vec<C64>,
    /// `(T11 + alpha_i)^{-1} (T11 - conj(alpha_i))` per shift.
    pub t11_i: Vec<CMat>,
    /// `(T22 + alpha_i)^{-1} (T22 - conj(alpha_i))` per shift.
    pub t22_i: Vec<CMat>,
    /// `R_0` of the thin QR `[I; X_0] = U_0 R_0`.
    pub r0: CMat,
    pub u0: CMat,
    /// Orthonormal basis `Q [I; -K^*] (I + K K^*)^{-1/2}`.
    pub z: CMat,
    /// `sqrt(1 - sigma_min(Z^* U_0)^2)`.
    pub d: f64,
    /// `||P_Z - P_U0||_2`, the same distance through projectors.
    pub d_projector: f64,
    pub gamma: f64,
    /// Stabilizing solution `Q_21 Q_11^{-1}`.
    pub x_plus: CMat,
}

fn cayley_block(t: &CMat, alpha: C64) -> Result<CMat> {
    let n = t.nrows();
    linalg::lu_solve(&(t + linalg::identity(n) * alpha), &(t - linalg::identity(n) * alpha.conj()), "T + alpha I")
        .map_err(|_| Error::SingularShift { shift: alpha })
}

fn stack_identity(x: &CMat) -> CMat {
    linalg::vstack(&linalg::identity(x.ncols()), x)
}

/// `sep(T11, T22) = min ||T11 K - K T22||_F / ||K||_F` for upper triangular blocks.
pub fn sep(t11: &CMat, t22: &CMat) -> Result<f64> {
    if t11.nrows() <= SEP_EXACT_MAX && t22.nrows() <= SEP_EXACT_MAX {
        Ok(sep_exact(t11, t22))
    } else {
        sep_estimate(t11, t22)
    }
}

/// Smallest singular value of `I (x) T11 - T22^T (x) I`.
pub fn sep_exact(t11: &CMat, t22: &CMat) -> f64 {
    let (m, n) = (t11.nrows(), t22.nrows());
    let mut l = CMat::zeros(m * n, m * n);
    for j in 0..n {
        for i in 0..m {
            for r in 0..m {
                l[(j * m + r, j * m + i)] += t11[(r, i)];
            }
            for c in 0..n {
                l[(c * m + i, j * m + i)] -= t22[(j, c)];
            }
        }
    }
    linalg::min_singular_value(&l)
}

/// Inverse power iteration on `L^{-*} L^{-1}` using triangular Sylvester solves.
pub fn sep_estimate(t11: &CMat, t22: &CMat) -> Result<f64> {
    let (m, n) = (t11.nrows(), t22.nrows());
    let mut x = CMat::from_fn(m, n, |i, j| cr(1.0 + ((i * 31 + j * 17) % 7) as f64 / 7.0));
    x /= cr(x.norm());
    let mut est = 0.0;
    for _ in 0..SEP_POWER_STEPS {
        let y = linalg::triangular_sylvester(t11, t22, &x)?;
        // L^* Y = T11^* Y - Y T22^*; its inverse through the transposed triangular problem.
        let w = linalg::triangular_sylvester(t22, t11, &(-y.adjoint()))?.adjoint();
        let nrm = w.norm();
        if nrm == 0.0 {
            break;
        }
        est = nrm;
        x = w / cr(nrm);
    }
    if est == 0.0 {
        return Err(Error::NoConvergence { what: "sep" });
    }
    Ok(1.0 / libm::sqrt(est))
}

/// Ordered Schur analysis of `H` for the given shifts and start `X_0`.
pub fn analyze_hamiltonian(care: &DenseCare, shifts: &[C64], x0: &CMat) -> Result<HamiltonianAnalysis> {
    let n = care.n();
    let h = hamiltonian(care);
    let (q, t) = ordered_hamiltonian_schur(&h)?;
    let t11 = t.view((0, 0), (n, n)).into_owned();
    let t12 = t.view((0, n), (n, n)).into_owned();
    let t22 = t.view((n, n), (n, n)).into_owned();
    let k = linalg::triangular_sylvester(&t11, &t22, &(-&t12))?;
    let sep = sep(&t11, &t22)?;
    let mut t11_i = Vec::with_capacity(shifts.len());
    let mut t22_i = Vec::with_capacity(shifts.len());
    for &alpha in shifts {
        t11_i.push(cayley_block(&t11, alpha)?);
        t22_i.push(cayley_block(&t22, alpha)?);
    }
    let q11 = q.view((0, 0), (n, n)).into_owned();
    let q21 = q.view((n, 0), (n, n)).into_owned();
    let x_plus = linalg::hermitian_part(
        &linalg::lu_solve(&q11.adjoint(), &q21.adjoint(), "Q11")
            .map_err(|_| Error::NoStabilizingSolution("Q11 is singular".into()))?
            .adjoint(),
    );

    let qr = stack_identity(x0).qr();
    let (u0, r0) = (qr.q(), qr.r());
    let kk = &k * k.adjoint();
    let z = &q * linalg::vstack(&linalg::identity(n), &(-k.adjoint())) * linalg::hermitian_inv_sqrt(&(linalg::identity(n) + kk))?;
    let smin = linalg::min_singular_value(&(z.adjoint() * &u0)).min(1.0);
    let d = libm::sqrt((1.0 - smin * smin).max(0.0));
    let d_projector = linalg::projector_distance(&z, &u0);
    if !(d < 1.0) || smin <= 1e-14 {
        return Err(Error::DistanceTooLarge { d });
    }
    let r0_inv = linalg::inverse(&r0, "R_0")?;
    let gamma = linalg::spectral_norm(&r0_inv) / libm::sqrt(1.0 - d * d) * (1.0 + t12.norm() / sep);
    Ok(HamiltonianAnalysis {
        h,
        q,
        t11,
        t12,
        t22,
        k,
        sep,
        shifts: shifts.to_vec(),
        t11_i,
        t22_i,
        r0,
        u0,
        z,
        d,
        d_projector,
        gamma,
        x_plus,
    })
}

impl HamiltonianAnalysis {
    pub fn n(&self) -> usize {
        self.t11.nrows()
    }

    /// `T22(k) ... T22(1)` and `T11(1)^{-1} ... T11(k)^{-1}`, shifts cycled.
    pub fn products(&self, k: usize) -> Result<(CMat, CMat)> {
        let n = self.n();
        let mut p22 = linalg::identity(n);
        let mut p11 = linalg::identity(n);
        for i in 0..k {
            let j = i % self.shifts.len();
            p22 = &self.t22_i[j] * p22;
            p11 *= linalg::inverse(&self.t11_i[j], "T11(i)")?;
        }
        Ok((p22, p11))
    }

    /// Residual of the block-diagonalizing Sylvester equation, relative to `||T12||_F`.
    pub fn coupling_defect(&self) -> f64 {
        let r = (&self.t11 * &self.k - &self.k * &self.t22 + &self.t12).norm();
        let s = self.t12.norm();
        if s == 0.0 {
            r
        } else {
            r / s
        }
    }
}

/// Subspace distance between `span[I; X_+]` and `span[I; X_k]`, and the bound
/// `gamma ||T22(k)...T22(1)||_2 ||T11(1)^{-1}...T11(k)^{-1}||_2`.
pub fn convergence_bound(analysis: &HamiltonianAnalysis, k: usize, x_k: &CMat) -> Result<(f64, f64)> {
    let u_plus = linalg::orth(&stack_identity(&analysis.x_plus));
    let u_k = linalg::orth(&stack_identity(x_k));
    let distance = linalg::projector_distance(&u_plus, &u_k);
    let (p22, p11) = analysis.products(k)?;
    let bound = analysis.gamma * linalg::spectral_norm(&p22) * linalg::spectral_norm(&p11);
    Ok((distance, bound))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadiusCheck {
    pub rho_t22: f64,
    pub rho_t11_inv: f64,
    /// `max_{lambda in lambda_+(H)} prod_i |lambda - conj(alpha_i)| / |lambda + alpha_i|`.
    pub objective: f64,
    /// Largest relative gap between the three quantities.
    pub defect: f64,
    /// `max |lambda_+ - (-conj(lambda_-))|` after matching, relative to `||H||_F`.
    pub mirror_defect: f64,
}

/// Compares spectral radii of the shift products with the rational objective over
/// all analysis shifts (one pass).
pub fn spectral_radius_identity_check(analysis: &HamiltonianAnalysis) -> Result<SpectralRadiusCheck> {
    let k = analysis.shifts.len();
    let (p22, p11) = analysis.products(k)?;
    let rho_t22 = linalg::spectral_radius(&p22)?;
    let rho_t11_inv = linalg::spectral_radius(&p11)?;
    let n = analysis.n();
    let plus: Vec<C64> = (0..n).map(|i| analysis.t22[(i, i)]).collect();
    let minus: Vec<C64> = (0..n).map(|i| analysis.t11[(i, i)]).collect();
    let objective = rational_objective(&analysis.shifts, &plus)?;
    let scale = objective.max(f64::MIN_POSITIVE);
    let defect = ((rho_t22 - objective).abs()).max((rho_t11_inv - objective).abs()) / scale;
    let mut used = alloc::vec![false; n];
    let mut mirror = 0.0f64;
    for &l in &plus {
        let mut best = (f64::INFINITY, 0);
        for (j, &m) in minus.iter().enumerate() {
            let gap = (l + m.conj()).norm();
            if !used[j] && gap < best.0 {
                best = (gap, j);
            }
        }
        used[best.1] = true;
        mirror = mirror.max(best.0);
    }
    Ok(SpectralRadiusCheck { rho_t22, rho_t11_inv, objective, defect, mirror_defect: mirror / analysis.h.norm().max(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_sep() {
        let a = CMat::from_element(1, 1, C64::new(-2.0, 1.0));
        let b = CMat::from_element(1, 1, C64::new(3.0, 0.5));
        assert!((sep_exact(&a, &b) - (a[(0, 0)] - b[(0, 0)]).norm()).abs() < 1e-14);
    }

    #[test]
    fn sep_estimate_matches_exact() {
        let p = crate::problem::random_stable_problem(6, 1, 1, 2).unwrap();
        let care = DenseCare::from_problem(&p).unwrap();
        let an = analyze_hamiltonian(&care, &[cr(1.0)], &CMat::zeros(6, 6)).unwrap();
        let est = sep_estimate(&an.t11, &an.t22).unwrap();
        assert!((est - an.sep).abs() < 1e-6 * an.sep);
    }

    #[test]
    fn block_diagonal_hamiltonian_has_zero_coupling() {
        let a = CMat::from_diagonal(&crate::CVec::from_vec(alloc::vec![cr(-1.0), cr(-3.0)]));
        let care = DenseCare::new(a, CMat::zeros(2, 2), CMat::zeros(2, 2));
        let an = analyze_hamiltonian(&care, &[cr(2.0)], &CMat::zeros(2, 2)).unwrap();
        assert!(an.k.norm() < 1e-14);
        let expect = linalg::spectral_norm(&linalg::inverse(&an.r0, "R_0").unwrap()) / libm::sqrt(1.0 - an.d * an.d);
        assert!((an.gamma - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn zero_start_distance_below_one_and_matches_projector() {
        for seed in 0..5 {
            let p = crate::problem::random_stable_problem(8, 1, 1, seed).unwrap();
            let care = DenseCare::from_problem(&p).unwrap();
            let an = analyze_hamiltonian(&care, &[cr(1.0), cr(4.0)], &CMat::zeros(8, 8)).unwrap();
            assert!(an.d < 1.0);
            assert!((an.d - an.d_projector).abs() < 1e-10);
            assert!(an.coupling_defect() < 1e-10);
        }
    }
}
