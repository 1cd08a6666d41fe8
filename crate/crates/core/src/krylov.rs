//! Arnoldi process for Ritz value estimates.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::{self, CMat, CVec, C64};

/// Ritz values from `steps` Arnoldi steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiRitz {
    pub values: Vec<C64>,
    /// The Krylov space became invariant before `steps` steps.
    pub breakdown: bool,
}

/// Runs Arnoldi with modified Gram-Schmidt plus one reorthogonalization pass.
pub fn arnoldi_ritz<F>(mut apply: F, start: &CVec, steps: usize) -> Result<ArnoldiRitz>
where
    F: FnMut(&CVec) -> Result<CVec>,
{
    let n = start.len();
    let steps = steps.min(n);
    let nrm = start.norm();
    if steps == 0 || nrm == 0.0 {
        return Ok(ArnoldiRitz { values: Vec::new(), breakdown: steps > 0 });
    }
    let mut basis: Vec<CVec> = Vec::with_capacity(steps + 1);
    basis.push(start / C64::new(nrm, 0.0));
    let mut h = CMat::zeros(steps + 1, steps);
    let mut done = steps;
    let mut breakdown = false;
    for j in 0..steps {
        let mut w = apply(&basis[j])?;
        let wn0 = w.norm();
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = q.dotc(&w);
                h[(i, j)] += c;
                w.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        let wn = w.norm();
        h[(j + 1, j)] = C64::new(wn, 0.0);
        if wn <= 1e-12 * wn0.max(f64::MIN_POSITIVE) {
            done = j + 1;
            breakdown = j + 1 < steps;
            break;
        }
        if j + 1 < steps {
            basis.push(w / C64::new(wn, 0.0));
        }
    }
    let hm = h.view((0, 0), (done, done)).into_owned();
    Ok(ArnoldiRitz { values: linalg::eigenvalues(&hm)?, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator_recovers_spectrum() {
        let d = [-1.0, -2.0, -5.0, -9.0];
        let start = CVec::from_element(4, C64::new(1.0, 0.0));
        let r = arnoldi_ritz(|x| Ok(CVec::from_fn(4, |i, _| x[i] * d[i])), &start, 4).unwrap();
        let mut got: Vec<f64> = r.values.iter().map(|z| z.re).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip([-9.0, -5.0, -2.0, -1.0]) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn invariant_start_breaks_down_early() {
        let mut start = CVec::zeros(3);
        start[1] = C64::new(1.0, 0.0);
        let r = arnoldi_ritz(|x| Ok(x * C64::new(-2.0, 0.0)), &start, 3).unwrap();
        assert!(r.breakdown);
        assert_eq!(r.values.len(), 1);
        assert!((r.values[0] + 2.0).norm() < 1e-14);
    }
}
