//! Riccati problem instances and generators.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::factor_sparse;
use crate::error::{Error, Result};
use crate::linalg::{self, to_complex, CMat, RMat, C64};
use crate::sparse::SparseMatrix;

/// The data of `A^* X E + E^* X A - E^* X B B^* X E + C^* C = 0`.
///
/// `B` is `n x q`, `C` is `p x n`; `F = B B^*` and `G = C^* C` are never formed
/// at large scale. An absent `E` means the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem {
    a: SparseMatrix,
    b: RMat,
    c: RMat,
    e: Option<SparseMatrix>,
}

impl CareProblem {
    pub fn new(a: SparseMatrix, b: RMat, c: RMat, e: Option<SparseMatrix>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                first: "A",
                second: "A",
                detail: format!("A must be square, got {}x{}", a.nrows(), a.ncols()),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument { what: "A", reason: "empty matrix".into() });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                first: "A",
                second: "B",
                detail: format!("A is {n}x{n} but B has {} rows", b.nrows()),
            });
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch {
                first: "A",
                second: "C",
                detail: format!("A is {n}x{n} but C has {} columns", c.ncols()),
            });
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidArgument {
                what: "B/C",
                reason: "B and C need at least one column/row".into(),
            });
        }
        if let Some(e) = &e {
            if e.nrows() != n || e.ncols() != n {
                return Err(Error::DimensionMismatch {
                    first: "A",
                    second: "E",
                    detail: format!("A is {n}x{n} but E is {}x{}", e.nrows(), e.ncols()),
                });
            }
            if e.has_empty_row_or_column() {
                return Err(Error::InvalidArgument {
                    what: "E",
                    reason: "structurally singular (empty row or column)".into(),
                });
            }
        }
        if 4 * (b.ncols() + c.nrows()) > n {
            log::warn!(
                "p + q = {} is not small compared with n = {n}; low-rank methods lose their advantage",
                b.ncols() + c.nrows()
            );
        }
        Ok(Self { a, b, c, e })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Rows of `C`.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Columns of `B`.
    pub fn q(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    pub fn c(&self) -> &RMat {
        &self.c
    }

    pub fn e(&self) -> Option<&SparseMatrix> {
        self.e.as_ref()
    }

    /// Same problem with `B` replaced.
    pub fn with_b(&self, b: RMat) -> Result<Self> {
        Self::new(self.a.clone(), b, self.c.clone(), self.e.clone())
    }

    /// `C^*` as a complex `n x p` block.
    pub fn c_adj(&self) -> CMat {
        to_complex(&self.c.transpose())
    }

    pub fn b_complex(&self) -> CMat {
        to_complex(&self.b)
    }

    /// `A^* x`.
    pub fn apply_a_adj(&self, x: &CMat) -> CMat {
        self.a.tr_mul_mat(x)
    }

    /// `A x`.
    pub fn apply_a(&self, x: &CMat) -> CMat {
        self.a.mul_mat(x)
    }

    /// `E^* x` (identity when `E` is absent).
    pub fn apply_e_adj(&self, x: &CMat) -> CMat {
        match &self.e {
            Some(e) => e.tr_mul_mat(x),
            None => x.clone(),
        }
    }

    /// `B^* x`, a `q x cols` block.
    pub fn apply_b_adj(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.q(), x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.q() {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..self.n() {
                    s += x[(i, c)] * self.b[(i, j)];
                }
                out[(j, c)] = s;
            }
        }
        out
    }

    /// `||C^* C||_F`, the residual of the zero approximation.
    pub fn g_norm(&self) -> f64 {
        let g = &self.c.transpose() * &self.c;
        g.norm()
    }

    /// Dense `(A E^{-1}, B B^*, E^{-*} C^* C E^{-1})`, i.e. the standard-form data
    /// with the same solution `X`.
    pub fn dense_standard_form(&self) -> Result<(CMat, CMat, CMat)> {
        let a = self.a.to_dense_complex();
        let b = self.b_complex();
        let c = to_complex(&self.c);
        let f = &b * b.adjoint();
        match &self.e {
            None => Ok((a, f, c.adjoint() * &c)),
            Some(e) => {
                let ed = e.to_dense_complex();
                let e_inv = linalg::inverse(&ed, "E")?;
                let ce = &c * &e_inv;
                Ok((&a * &e_inv, f, ce.adjoint() * ce))
            }
        }
    }

    /// Checks that all eigenvalues of `E^{-1} A` have negative real part when
    /// `n <= threshold`; returns the largest real part, or `None` if skipped.
    pub fn check_stability(&self, threshold: usize) -> Result<Option<f64>> {
        if self.n() > threshold {
            return Ok(None);
        }
        let (a, _, _) = self.dense_standard_form()?;
        let max_real = linalg::eigenvalues(&a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if max_real >= 0.0 {
            return Err(Error::Unstable { max_real });
        }
        Ok(Some(max_real))
    }

    /// Rejects `E` that fails to factor.
    pub fn check_e_nonsingular(&self) -> Result<()> {
        if let Some(e) = &self.e {
            factor_sparse(e, false).map_err(|_| Error::Singular { what: "E" })?;
        }
        Ok(())
    }
}

/// Finite-difference Laplacian on the unit square with `m x m` interior nodes,
/// scaled by `1/h^2`, `h = 1/(m+1)`; `B` is the ones vector and `C = e_1^T`.
pub fn make_laplacian_problem(m: usize) -> Result<CareProblem> {
    if m == 0 {
        return Err(Error::InvalidArgument { what: "interior_points_per_side", reason: "must be at least 1".into() });
    }
    let n = m * m;
    let h = 1.0 / (m as f64 + 1.0);
    let s = 1.0 / (h * h);
    let mut t = Vec::with_capacity(5 * n);
    for iy in 0..m {
        for ix in 0..m {
            let k = iy * m + ix;
            t.push((k, k, -4.0 * s));
            if ix > 0 {
                t.push((k, k - 1, s));
            }
            if ix + 1 < m {
                t.push((k, k + 1, s));
            }
            if iy > 0 {
                t.push((k, k - m, s));
            }
            if iy + 1 < m {
                t.push((k, k + m, s));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t)?;
    let b = RMat::from_element(n, 1, 1.0);
    let mut c = RMat::zeros(1, n);
    c[(0, 0)] = 1.0;
    CareProblem::new(a, b, c, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ToeplitzOptions {
    /// Use `B / ||B||` instead of the ones vector.
    pub normalize_b: bool,
    /// Keep the displayed band matrix (positive diagonal, unstable) instead of its negation.
    pub raw_sign: bool,
}

/// Nonnormal banded Toeplitz test matrix: diagonal 2.5, ones on the first three
/// superdiagonals, -1 on the first subdiagonal. Stored negated (stable) unless
/// `raw_sign` is set. `C = [1, -2, 1, -2, ...]`, `B` the ones vector.
pub fn make_toeplitz_problem(n: usize, opts: ToeplitzOptions) -> Result<CareProblem> {
    if n == 0 {
        return Err(Error::InvalidArgument { what: "n", reason: "must be at least 1".into() });
    }
    let sign = if opts.raw_sign { 1.0 } else { -1.0 };
    let mut t = Vec::with_capacity(5 * n);
    for i in 0..n {
        t.push((i, i, 2.5 * sign));
        for d in 1..=3 {
            if i + d < n {
                t.push((i, i + d, sign));
            }
        }
        if i > 0 {
            t.push((i, i - 1, -sign));
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t)?;
    let mut b = RMat::from_element(n, 1, 1.0);
    if opts.normalize_b {
        b /= libm::sqrt(n as f64);
    }
    let c = RMat::from_fn(1, n, |_, j| if j % 2 == 0 { 1.0 } else { -2.0 });
    CareProblem::new(a, b, c, None)
}

/// Seeded random stable instance: `A = D + N` with `D` diagonal in `[-10, -0.1]`
/// and `N` strictly lower triangular with entries bounded by `0.1/n`, which keeps
/// the symmetric part negative definite (so `A` is also passive).
pub fn random_stable_problem(n: usize, p: usize, q: usize, seed: u64) -> Result<CareProblem> {
    if n == 0 || p == 0 || q == 0 || p > n || q > n {
        return Err(Error::InvalidArgument {
            what: "n, p, q",
            reason: format!("need n >= 1 and 1 <= p, q <= n (got n={n}, p={p}, q={q})"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let scale = 0.1 / n as f64;
    for i in 0..n {
        t.push((i, i, rng.gen_range(-10.0..=-0.1)));
        for j in 0..i {
            t.push((i, j, scale * rng.gen_range(-1.0..1.0)));
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &t)?;
    let b = RMat::from_fn(n, q, |_, _| rng.gen_range(-1.0..1.0));
    let c = RMat::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
    CareProblem::new(a, b, c, None)
}
