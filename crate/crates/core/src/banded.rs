//! Sparse direct solves through a bandwidth-reducing permutation and a banded
//! LU factorization with partial pivoting.
//!
//! Every shifted matrix `-A^* + alpha E^*` shares the sparsity pattern of
//! `A + E`, so the ordering is computed once and each distinct shift gets its own
//! factorization, cached by the exact bit pattern of the shift.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::sparse::SparseMatrix;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Symmetric permutation `perm[new] = old` with its inverse.
#[derive(Debug, Clone)]
pub struct Ordering {
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl Ordering {
    pub fn natural(n: usize) -> Self {
        Self { perm: (0..n).collect(), inv: (0..n).collect() }
    }

    fn from_perm(perm: Vec<usize>) -> Self {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Self { perm, inv }
    }

    /// Picks the cheaper of the natural and reverse Cuthill-McKee orderings for
    /// the union pattern of `mats`.
    pub fn for_patterns(n: usize, mats: &[&SparseMatrix]) -> Self {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for m in mats {
            for (i, j, _) in m.triplets() {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let natural = Self::natural(n);
        let rcm = Self::from_perm(reverse_cuthill_mckee(&adj));
        if band_cost(&rcm, mats) < band_cost(&natural, mats) {
            rcm
        } else {
            natural
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

fn band_cost(ord: &Ordering, mats: &[&SparseMatrix]) -> usize {
    // either orientation may be factored (A or A^T), so count both half-bandwidths
    let (mut lower, mut upper) = (0usize, 0usize);
    for m in mats {
        for (i, j, _) in m.triplets() {
            let (r, c) = (ord.inv[i], ord.inv[j]);
            if r > c {
                lower = lower.max(r - c);
            } else {
                upper = upper.max(c - r);
            }
        }
    }
    let kl = lower.max(upper);
    kl * (lower + upper + kl + 1)
}

fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // start each component from a pseudo-peripheral node
        let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| adj[i].len()) else {
            break;
        };
        let start = pseudo_peripheral(adj, seed, &visited);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| adj[v].len());
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut node = seed;
    let mut ecc = 0;
    for _ in 0..4 {
        let (far, depth) = bfs_farthest(adj, node, blocked);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        node = far;
    }
    node
}

fn bfs_farthest(adj: &[Vec<usize>], start: usize, blocked: &[bool]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        if du > best.1 || (du == best.1 && adj[u].len() < adj[best.0].len()) {
            best = (u, du);
        }
        for &v in &adj[u] {
            if !blocked[v] && dist[v] == usize::MAX {
                dist[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
    best
}

/// LU factorization of a permuted band matrix, LAPACK `gbtrf` storage.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
    ordering: Ordering,
}

/// One term `coef * M` (or `coef * M^T`) of a sparse linear combination.
pub struct Term<'a> {
    pub coef: C64,
    pub matrix: &'a SparseMatrix,
    pub transpose: bool,
}

impl BandLu {
    pub fn factor(n: usize, terms: &[Term<'_>], ordering: &Ordering) -> Result<Self> {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for t in terms {
            for (i, j, _) in t.matrix.triplets() {
                let (r, c) = if t.transpose { (j, i) } else { (i, j) };
                let (r, c) = (ordering.inv[r], ordering.inv[c]);
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![ZERO; ldab * n];
        let mut scale = 0.0f64;
        for t in terms {
            for (i, j, v) in t.matrix.triplets() {
                let (r, c) = if t.transpose { (j, i) } else { (i, j) };
                let (r, c) = (ordering.inv[r], ordering.inv[c]);
                let val = t.coef * v;
                ab[kv + r - c + c * ldab] += val;
            }
        }
        for z in &ab {
            scale = scale.max(z.norm());
        }
        let tiny = 1e-14 * scale;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = -1.0;
            for r in 0..=km {
                let v = ab[kv + r + j * ldab].norm();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            if !(best > tiny) {
                return Err(Error::Singular { what: "shifted sparse matrix" });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(kv + j - c + c * ldab, kv + j + jp - c + c * ldab);
                }
            }
            if km > 0 {
                let piv = ab[kv + j * ldab];
                let inv = C64::new(1.0, 0.0) / piv;
                for r in 1..=km {
                    ab[kv + r + j * ldab] *= inv;
                }
                for c in j + 1..=ju {
                    let u = ab[kv + j - c + c * ldab];
                    if u == ZERO {
                        continue;
                    }
                    for r in 1..=km {
                        let l = ab[kv + r + j * ldab];
                        ab[kv + j + r - c + c * ldab] -= l * u;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv, ordering: ordering.clone() })
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn solve_permuted(&self, b: &mut [C64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        let ldab = 2 * self.kl + self.ku + 1;
        if self.kl > 0 {
            for j in 0..n.saturating_sub(1) {
                let km = self.kl.min(n - 1 - j);
                let l = self.ipiv[j];
                if l != j {
                    b.swap(l, j);
                }
                let bj = b[j];
                if bj != ZERO {
                    for r in 1..=km {
                        b[j + r] -= self.ab[kv + r + j * ldab] * bj;
                    }
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[kv + j * ldab];
            let bj = b[j];
            if bj != ZERO {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[kv + i - j + j * ldab] * bj;
                }
            }
        }
    }

    /// Solves `M X = rhs` column by column.
    pub fn solve(&self, rhs: &CMat) -> CMat {
        assert_eq!(rhs.nrows(), self.n);
        let mut out = CMat::zeros(self.n, rhs.ncols());
        let mut buf = vec![ZERO; self.n];
        for c in 0..rhs.ncols() {
            for new in 0..self.n {
                buf[new] = rhs[(self.ordering.perm[new], c)];
            }
            self.solve_permuted(&mut buf);
            for new in 0..self.n {
                out[(self.ordering.perm[new], c)] = buf[new];
            }
        }
        out
    }
}

fn shift_key(z: C64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

/// Cache of factorizations of `-A^* + alpha E^*`, one per distinct shift.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    a: SparseMatrix,
    e: Option<SparseMatrix>,
    ordering: Ordering,
    cache: BTreeMap<(u64, u64), BandLu>,
}

impl ShiftedSolver {
    pub fn new(a: &SparseMatrix, e: Option<&SparseMatrix>) -> Self {
        let n = a.nrows();
        let ordering = match e {
            Some(e) => Ordering::for_patterns(n, &[a, e]),
            None => Ordering::for_patterns(n, &[a]),
        };
        Self { a: a.clone(), e: e.cloned(), ordering, cache: BTreeMap::new() }
    }

    pub fn factorizations(&self) -> usize {
        self.cache.len()
    }

    fn factor_for(&mut self, alpha: C64) -> Result<&BandLu> {
        let key = shift_key(alpha);
        if !self.cache.contains_key(&key) {
            let ident;
            let e = match &self.e {
                Some(e) => e,
                None => {
                    ident = SparseMatrix::identity(self.a.nrows());
                    &ident
                }
            };
            let terms = [
                Term { coef: C64::new(-1.0, 0.0), matrix: &self.a, transpose: true },
                Term { coef: alpha, matrix: e, transpose: true },
            ];
            let lu = BandLu::factor(self.a.nrows(), &terms, &self.ordering)
                .map_err(|_| Error::SingularShift { shift: alpha })?;
            self.cache.insert(key, lu);
        }
        Ok(&self.cache[&key])
    }

    /// `(-A^* + alpha E^*)^{-1} rhs`.
    pub fn solve(&mut self, alpha: C64, rhs: &CMat) -> Result<CMat> {
        Ok(self.factor_for(alpha)?.solve(rhs))
    }
}

/// Factorization of a single sparse matrix (or its transpose).
pub fn factor_sparse(m: &SparseMatrix, transpose: bool) -> Result<BandLu> {
    let ord = Ordering::for_patterns(m.nrows(), &[m]);
    BandLu::factor(
        m.nrows(),
        &[Term { coef: C64::new(1.0, 0.0), matrix: m, transpose }],
        &ord,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sparse(n: usize, seed: u64) -> SparseMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + next()));
            for _ in 0..2 {
                let j = (next() * n as f64) as usize % n;
                t.push((i, j, next() - 0.5));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        for seed in 0..4 {
            let a = random_sparse(40, seed);
            let lu = factor_sparse(&a, false).unwrap();
            let b = CMat::from_fn(40, 2, |i, j| C64::new(i as f64, j as f64 + 1.0));
            let x = lu.solve(&b);
            assert!((a.mul_mat(&x) - &b).norm() < 1e-10 * b.norm());
            let lut = factor_sparse(&a, true).unwrap();
            let y = lut.solve(&b);
            assert!((a.tr_mul_mat(&y) - &b).norm() < 1e-10 * b.norm());
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (2, 2, 2.0), (1, 2, 1.0)]).unwrap();
        let lu = factor_sparse(&a, false).unwrap();
        let b = CMat::from_fn(3, 1, |i, _| C64::new(i as f64 + 1.0, 0.0));
        assert!((a.mul_mat(&lu.solve(&b)) - &b).norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(factor_sparse(&a, false).is_err());
    }

    #[test]
    fn shifted_solver_caches_per_shift() {
        let a = random_sparse(20, 7).scale(-1.0);
        let mut s = ShiftedSolver::new(&a, None);
        let b = CMat::from_element(20, 1, C64::new(1.0, 0.0));
        let alpha = C64::new(2.0, 1.0);
        let x = s.solve(alpha, &b).unwrap();
        let _ = s.solve(alpha, &b).unwrap();
        assert_eq!(s.factorizations(), 1);
        let resid = -a.tr_mul_mat(&x) + &x * alpha - &b;
        assert!(resid.norm() < 1e-12);
    }
}
