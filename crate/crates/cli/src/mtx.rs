//! MatrixMarket input and output.

use std::path::Path;

use nalgebra_sparse::io::{load_coo_from_matrix_market_file, save_to_matrix_market_str};
use nalgebra_sparse::CooMatrix;
use num_complex::Complex;
use riccati_core::{CMat, CareProblem, RMat, SparseMatrix};

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

fn read_coo(path: &Path) -> CliResult<CooMatrix<f64>> {
    load_coo_from_matrix_market_file::<f64, _>(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_sparse(path: &Path) -> CliResult<SparseMatrix> {
    let coo = read_coo(path)?;
    let trip: Vec<(usize, usize, f64)> = coo.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
    Ok(SparseMatrix::from_triplets(coo.nrows(), coo.ncols(), &trip)?)
}

pub fn read_dense(path: &Path) -> CliResult<RMat> {
    let coo = read_coo(path)?;
    let mut m = RMat::zeros(coo.nrows(), coo.ncols());
    for (i, j, v) in coo.triplet_iter() {
        m[(i, j)] += *v;
    }
    Ok(m)
}

/// `B` is `n x q`, `C` is `p x n`.
pub fn load_problem(a: &Path, b: &Path, c: &Path, e: Option<&Path>) -> CliResult<CareProblem> {
    let e = e.map(read_sparse).transpose()?;
    Ok(CareProblem::new(read_sparse(a)?, read_dense(b)?, read_dense(c)?, e)?)
}

fn sparse_to_coo(m: &SparseMatrix) -> CooMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        coo.push(i, j, v);
    }
    coo
}

fn dense_to_coo(m: &RMat) -> CooMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                coo.push(i, j, m[(i, j)]);
            }
        }
    }
    coo
}

/// Writes `A.mtx`, `B.mtx`, `C.mtx` and, if present, `E.mtx` into `dir`.
pub fn write_problem(dir: &Path, p: &CareProblem) -> CliResult<()> {
    write_atomic(&dir.join("A.mtx"), save_to_matrix_market_str(&sparse_to_coo(p.a())).as_bytes())?;
    write_atomic(&dir.join("B.mtx"), save_to_matrix_market_str(&dense_to_coo(p.b())).as_bytes())?;
    write_atomic(&dir.join("C.mtx"), save_to_matrix_market_str(&dense_to_coo(p.c())).as_bytes())?;
    if let Some(e) = p.e() {
        write_atomic(&dir.join("E.mtx"), save_to_matrix_market_str(&sparse_to_coo(e)).as_bytes())?;
    }
    Ok(())
}

/// Complex coordinate file with every entry stored.
pub fn write_complex(path: &Path, m: &CMat) -> CliResult<()> {
    let mut coo = CooMatrix::<Complex<f64>>::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            coo.push(i, j, m[(i, j)]);
        }
    }
    write_atomic(path, save_to_matrix_market_str(&coo).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = riccati_core::problem::random_stable_problem(7, 2, 3, 5).unwrap();
        write_problem(dir.path(), &p).unwrap();
        let q = load_problem(&dir.path().join("A.mtx"), &dir.path().join("B.mtx"), &dir.path().join("C.mtx"), None).unwrap();
        assert_eq!(p.a().to_dense(), q.a().to_dense());
        assert_eq!(p.b(), q.b());
        assert_eq!(p.c(), q.c());
    }

    #[test]
    fn reads_array_format() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("b.mtx");
        std::fs::write(&f, "%%MatrixMarket matrix array real general\n3 1\n1.0\n-2.0\n0.5\n").unwrap();
        let b = read_dense(&f).unwrap();
        assert_eq!(b.as_slice(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn malformed_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("bad.mtx");
        std::fs::write(&f, "not a matrix\n").unwrap();
        assert!(matches!(read_sparse(&f), Err(CliError::Config(_))));
    }
}
