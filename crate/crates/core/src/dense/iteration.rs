use alloc::vec::Vec;

use super::care::hamiltonian;
use super::DenseCare;
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};

/// `S(alpha) = (H + alpha I)^{-1} (H - conj(alpha) I)`.
pub fn cayley(h: &CMat, alpha: C64) -> Result<CMat> {
    let n = h.nrows();
    let hp = h + linalg::identity(n) * alpha;
    let hm = h - linalg::identity(n) * alpha.conj();
    linalg::lu_solve(&hp, &hm, "H + alpha I").map_err(|_| Error::SingularShift { shift: alpha })
}

/// Relative gap between the two expressions of the Cayley transform,
/// `(H + alpha)^{-1}(H - conj(alpha))` and `I - 2 Re(alpha) (H + alpha)^{-1}`.
pub fn cayley_form_gap(h: &CMat, alpha: C64) -> Result<f64> {
    let n = h.nrows();
    let s1 = cayley(h, alpha)?;
    let inv = linalg::inverse(&(h + linalg::identity(n) * alpha), "H + alpha I")
        .map_err(|_| Error::SingularShift { shift: alpha })?;
    let s2 = linalg::identity(n) - inv * cr(2.0 * alpha.re);
    Ok(linalg::rel_diff(&s1, &s2))
}

/// Schur complements of `H + alpha I`:
/// `S_1 = (-A^* + alpha) - G (A + alpha)^{-1} F` and
/// `S_2 = (A + alpha) - F (-A^* + alpha)^{-1} G`.
pub fn schur_complements(care: &DenseCare, alpha: C64) -> Result<(CMat, CMat)> {
    let n = care.n();
    let ap = &care.a + linalg::identity(n) * alpha;
    let am = -care.a.adjoint() + linalg::identity(n) * alpha;
    let s1 = &am - &care.g * linalg::lu_solve(&ap, &care.f, "A + alpha I")?;
    let s2 = &ap - &care.f * linalg::lu_solve(&am, &care.g, "-A^* + alpha I")?;
    Ok((s1, s2))
}

/// Blocks of `S(alpha) = [M_1, M_2; N_1, N_2]` from the Schur complements.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticBlocks {
    pub m1: CMat,
    pub m2: CMat,
    pub n1: CMat,
    pub n2: CMat,
}

impl SymplecticBlocks {
    /// Defects of `M1^* N1 = N1^* M1`, `M2^* N2 = N2^* M2` and `M2^* N1 - N2^* M1 = -I`.
    pub fn relation_defects(&self) -> [f64; 3] {
        let n = self.m1.nrows();
        let d1 = (self.m1.adjoint() * &self.n1 - self.n1.adjoint() * &self.m1).norm();
        let d2 = (self.m2.adjoint() * &self.n2 - self.n2.adjoint() * &self.m2).norm();
        let d3 = (self.m2.adjoint() * &self.n1 - self.n2.adjoint() * &self.m1 + linalg::identity(n)).norm();
        [d1, d2, d3]
    }

    pub fn assemble(&self) -> CMat {
        linalg::vstack(&linalg::hstack(&self.m1, &self.m2), &linalg::hstack(&self.n1, &self.n2))
    }
}

pub fn symplectic_blocks(care: &DenseCare, alpha: C64) -> Result<SymplecticBlocks> {
    let n = care.n();
    let two_a = cr(2.0 * alpha.re);
    let id = linalg::identity(n);
    let (s1, s2) = schur_complements(care, alpha)?;
    let s1_inv = linalg::inverse(&s1, "S_1")?;
    let s2_inv = linalg::inverse(&s2, "S_2")?;
    let ap = &care.a + &id * alpha;
    let am = -care.a.adjoint() + &id * alpha;
    let n1 = linalg::lu_solve(&am, &(&care.g * &s2_inv), "-A^* + alpha I")? * (-two_a);
    let n2 = &id - &s1_inv * two_a;
    let m1 = &id - &s2_inv * two_a;
    let m2 = linalg::lu_solve(&ap, &(&care.f * &s1_inv), "A + alpha I")? * (-two_a);
    Ok(SymplecticBlocks { m1, m2, n1, n2 })
}

/// One step of the Schur-complement fixed-point form
/// `X_k = [-2a S_1^{-1} G (A+alpha)^{-1} + (I - 2a S_1^{-1}) X]
///        [I - 2a S_2^{-1} - 2a S_2^{-1} F (-A^*+alpha)^{-1} X]^{-1}`.
pub fn fixed_point_step(care: &DenseCare, alpha: C64, x: &CMat, step: usize) -> Result<CMat> {
    let n = care.n();
    let two_a = cr(2.0 * alpha.re);
    let id = linalg::identity(n);
    let (s1, s2) = schur_complements(care, alpha)?;
    let ap = &care.a + &id * alpha;
    let am = -care.a.adjoint() + &id * alpha;
    let g_ap = linalg::lu_solve(&ap.adjoint(), &care.g.adjoint(), "A + alpha I")?.adjoint();
    let num = linalg::lu_solve(&s1, &(-(g_ap * two_a) - x * two_a), "S_1")? + x;
    let f_am_x = &care.f * linalg::lu_solve(&am, x, "-A^* + alpha I")?;
    let den = &id - linalg::lu_solve(&s2, &(&id + f_am_x), "S_2")? * two_a;
    right_divide(&num, &den).map_err(|_| Error::IterationBreakdown { step })
}

/// `num * den^{-1}`.
fn right_divide(num: &CMat, den: &CMat) -> Result<CMat> {
    Ok(linalg::lu_solve(&den.adjoint(), &num.adjoint(), "M")?.adjoint())
}

/// One iterate of the dense subspace iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIterate {
    pub x: CMat,
    /// `[M; N] = S(alpha_k) [I; X_{k-1}]`.
    pub m: CMat,
    pub n: CMat,
    /// Relative gap to the fixed-point form run alongside; `None` when `H + alpha_k I`
    /// is singular and only the limiting subspace is available, or when the
    /// Schur-complement form is undefined for `alpha_k`.
    pub form_gap: Option<f64>,
}

/// Basis of `{w : (H + alpha) w = (H - conj(alpha)) u, u in span(U)}`, which is the
/// image `S(alpha) span(U)` and stays defined when `H + alpha I` is singular.
fn cayley_image_limit(h: &CMat, alpha: C64, u: &CMat) -> Result<CMat> {
    let n2 = h.nrows();
    let m = u.ncols();
    let hp = h + linalg::identity(n2) * alpha;
    let rhs = (h - linalg::identity(n2) * alpha.conj()) * u;
    let mut sys = CMat::zeros(n2 + m, n2 + m);
    sys.view_mut((0, 0), (n2, n2)).copy_from(&hp);
    sys.view_mut((0, n2), (n2, m)).copy_from(&(-rhs));
    let svd = sys.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut idx: alloc::vec::Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let mut w = CMat::zeros(n2, m);
    for (c, &i) in idx.iter().take(m).enumerate() {
        let row = vt.row(i).adjoint();
        w.set_column(c, &row.rows(0, n2));
    }
    Ok(linalg::orth(&w))
}

/// Runs `k` steps of `[M; N] = S(alpha_k) [I; X_{k-1}]`, `X_k = N M^{-1}`, cycling
/// `shifts`, next to the Schur-complement fixed-point form.
pub fn dense_subspace_iteration(care: &DenseCare, shifts: &[C64], x0: &CMat, k: usize) -> Result<Vec<DenseIterate>> {
    if shifts.is_empty() {
        return Err(Error::InvalidArgument { what: "shifts", reason: "empty shift list".into() });
    }
    let n = care.n();
    let h = hamiltonian(care);
    let mut out: Vec<DenseIterate> = Vec::with_capacity(k);
    let mut x_block = x0.clone();
    let mut x_fixed = x0.clone();
    for step in 1..=k {
        let alpha = shifts[(step - 1) % shifts.len()];
        let start = linalg::vstack(&linalg::identity(n), &x_block);
        let (mn, exact) = match cayley(&h, alpha) {
            Ok(s) => (s * start, true),
            Err(Error::SingularShift { .. }) => (cayley_image_limit(&h, alpha, &start)?, false),
            Err(e) => return Err(e),
        };
        let m = mn.rows(0, n).into_owned();
        let nn = mn.rows(n, n).into_owned();
        let x = right_divide(&nn, &m).map_err(|_| Error::IterationBreakdown { step })?;
        let fixed = if exact {
            match fixed_point_step(care, alpha, &x_fixed, step) {
                Ok(xf) => Some(xf),
                // the Schur-complement form needs A + alpha I nonsingular, the Cayley form does not
                Err(Error::Singular { .. } | Error::IterationBreakdown { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let form_gap = match fixed {
            Some(xf) => {
                let gap = linalg::rel_diff(&x, &xf);
                x_fixed = xf;
                Some(gap)
            }
            None => {
                x_fixed = x.clone();
                None
            }
        };
        x_block = x.clone();
        out.push(DenseIterate { x, m, n: nn, form_gap });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> DenseCare {
        let m = |v: f64| CMat::from_element(1, 1, cr(v));
        DenseCare::new(m(-1.0), m(1.0), m(3.0))
    }

    #[test]
    fn scalar_first_iterate_is_exact() {
        let it = dense_subspace_iteration(&scalar(), &[cr(2.0)], &CMat::zeros(1, 1), 1).unwrap();
        // alpha = 2 is an eigenvalue of -H: only the limiting image exists
        assert!((it[0].x[(0, 0)] - cr(1.0)).norm() < 1e-12);
        assert!(it[0].form_gap.is_none());
        let it = dense_subspace_iteration(&scalar(), &[cr(0.5)], &CMat::zeros(1, 1), 3).unwrap();
        assert!(it.iter().all(|s| s.form_gap.unwrap() < 1e-12));
    }

    #[test]
    fn cayley_forms_agree() {
        let p = crate::problem::random_stable_problem(6, 1, 2, 3).unwrap();
        let care = DenseCare::from_problem(&p).unwrap();
        let h = hamiltonian(&care);
        assert!(cayley_form_gap(&h, C64::new(1.5, 0.5)).unwrap() < 1e-12);
    }

    #[test]
    fn symplectic_blocks_assemble_cayley() {
        let p = crate::problem::random_stable_problem(7, 2, 1, 9).unwrap();
        let care = DenseCare::from_problem(&p).unwrap();
        let alpha = C64::new(0.8, -0.3);
        let blocks = symplectic_blocks(&care, alpha).unwrap();
        let s = cayley(&hamiltonian(&care), alpha).unwrap();
        assert!(linalg::rel_diff(&blocks.assemble(), &s) < 1e-12);
        for d in blocks.relation_defects() {
            assert!(d < 1e-10);
        }
    }
}
