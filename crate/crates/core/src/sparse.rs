//! Real sparse matrices in compressed sparse row form.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed;
    /// explicit zeros are kept so that the pattern survives a file round trip.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument {
                    what: "triplets",
                    reason: alloc::format!("entry ({i}, {j}) outside a {nrows}x{ncols} matrix"),
                });
            }
            entries.push((i, j, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &RMat) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("indices in range")
    }

    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_dense_complex(&self) -> CMat {
        self.to_dense().map(|v| C64::new(v, 0.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// True when some row or column holds no nonzero value.
    pub fn has_empty_row_or_column(&self) -> bool {
        let mut row_hit = vec![false; self.nrows];
        let mut col_hit = vec![false; self.ncols];
        for (i, j, v) in self.triplets() {
            if v != 0.0 {
                row_hit[i] = true;
                col_hit[j] = true;
            }
        }
        row_hit.iter().chain(col_hit.iter()).any(|h| !h)
    }

    /// `self * x` for a complex block of vectors.
    pub fn mul_mat(&self, x: &CMat) -> CMat {
        assert_eq!(self.ncols, x.nrows());
        let mut y = CMat::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            for i in 0..self.nrows {
                let mut s = C64::new(0.0, 0.0);
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += x[(self.col_idx[k], c)] * self.values[k];
                }
                y[(i, c)] = s;
            }
        }
        y
    }

    /// `self^T * x` (the adjoint, since entries are real).
    pub fn tr_mul_mat(&self, x: &CMat) -> CMat {
        assert_eq!(self.nrows, x.nrows());
        let mut y = CMat::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            for i in 0..self.nrows {
                let xi = x[(i, c)];
                if xi == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    y[(self.col_idx[k], c)] += xi * self.values[k];
                }
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_products_match_dense() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 0, 2.0), (2, 1, -1.5), (1, 2, 4.0)]).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 3.0);
        let x = CMat::from_fn(3, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let d = a.to_dense_complex();
        assert!((a.mul_mat(&x) - &d * &x).norm() < 1e-15);
        assert!((a.tr_mul_mat(&x) - d.transpose() * &x).norm() < 1e-15);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn empty_row_detection() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert!(a.has_empty_row_or_column());
        assert!(!SparseMatrix::identity(3).has_empty_row_or_column());
    }
}
