//! Dense complex linear algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::linalg::{Schur, SymmetricEigen, LU};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

const PIVOT_TOL: f64 = 1e-14;

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(cr)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Largest imaginary part magnitude over all entries, relative to the Frobenius norm.
pub fn relative_imaginary(m: &CMat) -> f64 {
    let nrm = m.norm();
    if nrm == 0.0 {
        return 0.0;
    }
    let im = m.iter().map(|z| z.im * z.im).sum::<f64>();
    libm::sqrt(im) / nrm
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn min_singular_value(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

fn checked_lu(a: &CMat, what: &'static str) -> Result<LU<C64, nalgebra::Dyn, nalgebra::Dyn>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument {
            what,
            reason: alloc::format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols()),
        });
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !diag.is_empty() && (max == 0.0 || !(min > PIVOT_TOL * max)) {
        return Err(Error::Singular { what });
    }
    Ok(lu)
}

/// Solves `a x = b` with partial-pivoting LU, rejecting numerically singular `a`.
pub fn lu_solve(a: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    let lu = checked_lu(a, what)?;
    lu.solve(b).ok_or(Error::Singular { what })
}

pub fn inverse(a: &CMat, what: &'static str) -> Result<CMat> {
    lu_solve(a, &identity(a.nrows()), what)
}

/// Solves with a Hermitian matrix: Cholesky when it is positive definite, LU otherwise.
pub fn hermitian_solve(t: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    if t.nrows() == 0 {
        return Ok(b.clone());
    }
    if let Some(ch) = t.clone().cholesky() {
        let l = ch.l_dirty();
        let dmax = (0..t.nrows()).map(|i| l[(i, i)].norm()).fold(0.0, f64::max);
        let dmin = (0..t.nrows()).map(|i| l[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        // Squared because the Cholesky factor carries the square root of the conditioning.
        if dmin * dmin > PIVOT_TOL * dmax * dmax {
            return Ok(ch.solve(b));
        }
    }
    lu_solve(t, b, what)
}

pub fn schur(m: &CMat, what: &'static str) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let s = Schur::try_new(m.clone(), f64::EPSILON, 2000 * n.max(10))
        .ok_or(Error::NoConvergence { what })?;
    let (q, mut t) = s.unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(m, "eigenvalues")?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalues of a Hermitian matrix (its Hermitian part is used), ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let e = SymmetricEigen::new(hermitian_part(m));
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    v
}

/// `m^{-1/2}` for Hermitian positive definite `m`.
pub fn hermitian_inv_sqrt(m: &CMat) -> Result<CMat> {
    let e = SymmetricEigen::new(hermitian_part(m));
    if e.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Singular { what: "inverse square root" });
    }
    let d = CMat::from_diagonal(&e.eigenvalues.map(|l| cr(1.0 / libm::sqrt(l))));
    Ok(&e.eigenvectors * d * e.eigenvectors.adjoint())
}

/// Swaps the adjacent diagonal entries `k` and `k+1` of an upper triangular Schur
/// factor, updating the unitary factor accordingly.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let c = t[(k + 1, k + 1)];
    // eigenvector of the 2x2 block for eigenvalue c
    let x = [b, c - a];
    let nrm = libm::sqrt(x[0].norm_sqr() + x[1].norm_sqr());
    if nrm == 0.0 {
        return;
    }
    let z1 = x[0] / nrm;
    let z2 = x[1] / nrm;
    // Z = [[z1, -conj(z2)], [z2, conj(z1)]]
    let (w11, w12, w21, w22) = (z1, -z2.conj(), z2, z1.conj());
    for i in 0..n {
        let ti = t[(i, k)];
        let tj = t[(i, k + 1)];
        t[(i, k)] = ti * w11 + tj * w21;
        t[(i, k + 1)] = ti * w12 + tj * w22;
        let qi = q[(i, k)];
        let qj = q[(i, k + 1)];
        q[(i, k)] = qi * w11 + qj * w21;
        q[(i, k + 1)] = qi * w12 + qj * w22;
    }
    for j in 0..n {
        let ti = t[(k, j)];
        let tj = t[(k + 1, j)];
        t[(k, j)] = w11.conj() * ti + w21.conj() * tj;
        t[(k + 1, j)] = w12.conj() * ti + w22.conj() * tj;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

/// Reorders a complex Schur form so that eigenvalues satisfying `select` lead.
/// Returns how many were selected.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: impl Fn(C64) -> bool) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for j in 0..n {
        if select(t[(j, j)]) {
            let mut k = j;
            while k > placed {
                swap_adjacent(q, t, k - 1);
                k -= 1;
            }
            placed += 1;
        }
    }
    placed
}

/// Orthonormal basis of the column space (thin QR, no rank detection).
pub fn orth(m: &CMat) -> CMat {
    if m.ncols() == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    m.clone().qr().q()
}

/// Sine of the largest principal angle, `||(I - U1 U1^*) U2||_2`, for orthonormal
/// bases of equal dimension. Accurate for small angles.
pub fn principal_sine(u1: &CMat, u2: &CMat) -> f64 {
    spectral_norm(&(u2 - u1 * (u1.adjoint() * u2)))
}

/// Spectral norm of the difference of the orthogonal projectors onto two spans.
pub fn projector_distance(u1: &CMat, u2: &CMat) -> f64 {
    let p1 = u1 * u1.adjoint();
    let p2 = u2 * u2.adjoint();
    spectral_norm(&(p1 - p2))
}

/// Solves `t11 k - k t22 = rhs` for upper triangular `t11`, `t22`.
pub fn triangular_sylvester(t11: &CMat, t22: &CMat, rhs: &CMat) -> Result<CMat> {
    let m = t11.nrows();
    let n = t22.nrows();
    let mut k = CMat::zeros(m, n);
    let scale = t11.norm().max(t22.norm()).max(f64::MIN_POSITIVE);
    for j in 0..n {
        // (t11 - t22[j,j]) k_j = rhs_j + sum_{l<j} k_l t22[l,j]
        let mut col: Vec<C64> = (0..m).map(|i| rhs[(i, j)]).collect();
        for l in 0..j {
            let c = t22[(l, j)];
            if c != C64::new(0.0, 0.0) {
                for i in 0..m {
                    col[i] += k[(i, l)] * c;
                }
            }
        }
        let shift = t22[(j, j)];
        for i in (0..m).rev() {
            let mut s = col[i];
            for l in i + 1..m {
                s -= t11[(i, l)] * k[(l, j)];
            }
            let d = t11[(i, i)] - shift;
            if d.norm() <= 1e-14 * scale {
                return Err(Error::Singular { what: "Sylvester operator" });
            }
            k[(i, j)] = s / d;
        }
    }
    Ok(k)
}

/// `kron(m, I_p)`.
pub fn kron_identity(m: &CMat, p: usize) -> CMat {
    if p == 1 {
        return m.clone();
    }
    let mut out = CMat::zeros(m.nrows() * p, m.ncols() * p);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != C64::new(0.0, 0.0) {
                for r in 0..p {
                    out[(i * p + r, j * p + r)] = v;
                }
            }
        }
    }
    out
}

/// Block diagonal matrix with the given diagonal blocks.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Relative distance `||a - b||_F / max(||a||_F, ||b||_F)`, zero when both vanish.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let d = (a - b).norm();
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        CMat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn reordered_schur_keeps_factorization() {
        let m = sample(12, 3);
        let (mut q, mut t) = schur(&m, "test").unwrap();
        let k = reorder_schur(&mut q, &mut t, |z| z.re < 0.0);
        assert!((&q * &t * q.adjoint() - &m).norm() < 1e-12 * m.norm());
        for i in 0..12 {
            assert_eq!(i < k, t[(i, i)].re < 0.0);
            for j in 0..i {
                assert_eq!(t[(i, j)], C64::new(0.0, 0.0));
            }
        }
        assert!((q.adjoint() * &q - identity(12)).norm() < 1e-13);
    }

    #[test]
    fn triangular_sylvester_solves() {
        let (_, t1) = schur(&sample(5, 1), "a").unwrap();
        let (_, t2) = schur(&(sample(4, 2) + identity(4) * cr(3.0)), "b").unwrap();
        let rhs = CMat::from_fn(5, 4, |i, j| C64::new(i as f64, j as f64 - 1.0));
        let k = triangular_sylvester(&t1, &t2, &rhs).unwrap();
        assert!((&t1 * &k - &k * &t2 - rhs).norm() < 1e-11);
    }

    #[test]
    fn singular_lu_is_rejected() {
        let a = CMat::from_row_slice(2, 2, &[cr(1.0), cr(2.0), cr(2.0), cr(4.0)]);
        assert!(matches!(
            lu_solve(&a, &identity(2), "a"),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn distance_of_identical_spans_is_zero() {
        let u = orth(&sample(6, 9).columns(0, 3).into_owned());
        let v = &u * orth(&sample(3, 4));
        assert!(projector_distance(&u, &v) < 1e-12);
        assert!(principal_sine(&u, &v) < 1e-7);
    }
}
