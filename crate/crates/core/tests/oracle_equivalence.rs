use riccati_core::banded::ShiftedSolver;
use riccati_core::dense::{dense_subspace_iteration, DenseCare};
use riccati_core::ilrsi::{lrsi_reference_step, IlrsiState};
use riccati_core::linalg::{rel_diff, CMat, C64};
use riccati_core::problem::random_stable_problem;

fn compare(n: usize, p: usize, q: usize, seed: u64, shifts: &[C64], k: usize) -> (f64, f64) {
    let prob = random_stable_problem(n, p, q, seed).unwrap();
    let care = DenseCare::from_problem(&prob).unwrap();
    let dense = dense_subspace_iteration(&care, shifts, &CMat::zeros(n, n), k).unwrap();
    let mut st = IlrsiState::init(&prob, shifts[0]).unwrap();
    let mut solver = ShiftedSolver::new(prob.a(), None);
    let (mut u, mut t) = lrsi_reference_step(&prob, &mut solver, &CMat::zeros(n, 0), &CMat::zeros(0, 0), shifts[0]).unwrap();
    let (mut worst_i, mut worst_l) = (0.0f64, 0.0f64);
    for step in 1..=k {
        if step > 1 {
            let a = shifts[(step - 1) % shifts.len()];
            st.step(&prob, a).unwrap();
            let r = lrsi_reference_step(&prob, &mut solver, &u, &t, a).unwrap();
            u = r.0;
            t = r.1;
        }
        let xi = st.solution().to_dense().unwrap();
        let tinv = t.clone().try_inverse().unwrap();
        let xl = &u * tinv * u.adjoint();
        worst_i = worst_i.max(rel_diff(&xi, &dense[step - 1].x));
        worst_l = worst_l.max(rel_diff(&xl, &dense[step - 1].x));
    }
    (worst_i, worst_l)
}

#[test]
fn ilrsi_matches_dense_real_distinct() {
    let s: Vec<C64> = [0.5, 2.0, 7.0, 1.2, 3.3].iter().map(|&x| C64::new(x, 0.0)).collect();
    let (i, l) = compare(12, 1, 1, 3, &s, 5);
    println!("real distinct: ilrsi {i:e} lrsi {l:e}");
    assert!(i < 1e-8 && l < 1e-8);
}

#[test]
fn ilrsi_matches_dense_complex() {
    let s = [C64::new(1.0, 2.0), C64::new(1.0, -2.0), C64::new(3.0, 0.0), C64::new(0.4, 0.7), C64::new(0.4, -0.7)];
    let (i, l) = compare(10, 2, 2, 5, &s, 5);
    println!("complex: ilrsi {i:e} lrsi {l:e}");
    assert!(i < 1e-8 && l < 1e-8);
}
