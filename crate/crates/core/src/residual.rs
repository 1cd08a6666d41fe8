//! Incrementally updated QR factorization for residual norms of the form
//! `||W M W^*||_F = ||R M R^*||_F` with `W = Q R`.

use alloc::vec::Vec;

use crate::linalg::{cr, CMat, CVec, C64};

/// Columns whose orthogonal remainder falls below this fraction of their norm
/// add no new direction to `Q`.
const DEFLATION_TOL: f64 = 1e-14;

/// Gram-Schmidt QR with one reorthogonalization pass per column.
#[derive(Debug, Clone, Default)]
pub struct IncrementalQr {
    q: Vec<CVec>,
    /// Column `j` of `R`, with as many entries as `Q` had columns after it was pushed.
    r_cols: Vec<Vec<C64>>,
}

impl IncrementalQr {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of columns pushed so far.
    pub fn ncols(&self) -> usize {
        self.r_cols.len()
    }

    /// Number of orthonormal directions kept.
    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn push_columns(&mut self, cols: &CMat) {
        for c in 0..cols.ncols() {
            let mut w: CVec = cols.column(c).into_owned();
            let w0 = w.norm();
            let mut coef = alloc::vec![C64::new(0.0, 0.0); self.q.len()];
            for _ in 0..2 {
                for (i, qi) in self.q.iter().enumerate() {
                    let h = qi.dotc(&w);
                    coef[i] += h;
                    w.axpy(-h, qi, cr(1.0));
                }
            }
            let wn = w.norm();
            if wn > DEFLATION_TOL * w0 && wn > 0.0 {
                self.q.push(w / cr(wn));
                coef.push(cr(wn));
            }
            self.r_cols.push(coef);
        }
    }

    /// The `rank x ncols` factor `R`.
    pub fn r_factor(&self) -> CMat {
        let mut r = CMat::zeros(self.q.len(), self.r_cols.len());
        for (j, col) in self.r_cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                r[(i, j)] = *v;
            }
        }
        r
    }

    pub fn q_factor(&self) -> CMat {
        let n = self.q.first().map_or(0, |v| v.len());
        let mut q = CMat::zeros(n, self.q.len());
        for (j, v) in self.q.iter().enumerate() {
            q.set_column(j, v);
        }
        q
    }

    /// `||R^* R - W^* W||_F / ||W^* W||_F` for the matrix `W` that was pushed.
    pub fn gram_defect(&self, w: &CMat) -> f64 {
        let r = self.r_factor();
        let g = w.adjoint() * w;
        let nrm = g.norm();
        if nrm == 0.0 {
            return (r.adjoint() * r).norm();
        }
        (r.adjoint() * &r - g).norm() / nrm
    }

    /// `||R M R^*||_F`; `m` is indexed like the pushed columns.
    pub fn sandwich_norm(&self, m: &CMat) -> f64 {
        let r = self.r_factor();
        (&r * m * r.adjoint()).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, k: usize) -> CMat {
        let mut s = 0x2545_f491_4f6c_dd1du64;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMat::from_fn(n, k, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn reproduces_gram_matrix_across_pushes() {
        let w = sample(30, 9);
        let mut qr = IncrementalQr::new();
        qr.push_columns(&w.columns(0, 4).into_owned());
        qr.push_columns(&w.columns(4, 5).into_owned());
        assert!(qr.gram_defect(&w) < 1e-13);
        let q = qr.q_factor();
        assert!((q.adjoint() * &q - CMat::identity(9, 9)).norm() < 1e-13);
        assert!((q * qr.r_factor() - w).norm() < 1e-12);
    }

    #[test]
    fn dependent_column_is_deflated() {
        let w = sample(10, 2);
        let mut qr = IncrementalQr::new();
        qr.push_columns(&w);
        qr.push_columns(&(w.columns(0, 1) * cr(2.0)));
        assert_eq!((qr.ncols(), qr.rank()), (3, 2));
        let mut full = CMat::zeros(10, 3);
        full.columns_mut(0, 2).copy_from(&w);
        full.set_column(2, &(w.column(0) * cr(2.0)));
        assert!(qr.gram_defect(&full) < 1e-13);
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let w = sample(12, 4);
        let mut qr = IncrementalQr::new();
        qr.push_columns(&w);
        let m = CMat::from_fn(4, 4, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let direct = (&w * &m * w.adjoint()).norm();
        assert!((qr.sandwich_norm(&m) - direct).abs() < 1e-12 * direct);
    }
}
