use proptest::prelude::*;
use riccati_core::galerkin::{build_distinct_basis, check_sylvester_identity, distinct_p_inverse, distinct_q_inverse};
use riccati_core::ilrsi::{ilrsi_solve, residual_norm};
use riccati_core::problem::random_stable_problem;
use riccati_core::residual::IncrementalQr;
use riccati_core::shifts::rational_objective;
use riccati_core::{CMat, IlrsiOptions, ShiftOrigin, ShiftSequence, C64};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn shift() -> impl Strategy<Value = C64> {
    (0.2f64..8.0, -4.0f64..4.0).prop_map(|(re, im)| C64::new(re, im))
}

fn real_shifts(k: usize) -> impl Strategy<Value = Vec<C64>> {
    proptest::collection::vec(0.2f64..8.0, k).prop_map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
}

fn well_separated(shifts: &[C64], gap: f64) -> bool {
    shifts.iter().enumerate().all(|(i, a)| shifts[..i].iter().all(|b| (a - b).norm() > gap * a.norm().max(b.norm())))
}

/// `R = A^T X + X A - X B B^T X + C^T C` assembled densely.
fn dense_residual(p: &riccati_core::CareProblem, x: &CMat) -> CMat {
    let a = p.a().to_dense_complex();
    let b = p.b().map(|v| C64::new(v, 0.0));
    let c = p.c().map(|v| C64::new(v, 0.0));
    a.adjoint() * x + x * &a - x * &b * b.adjoint() * x + c.adjoint() * c
}

fn hermitian_min_eig(x: &CMat) -> f64 {
    let h = (x + x.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn p_inverse_closed_form(alphas in proptest::collection::vec(shift(), 1..7)) {
        prop_assume!(well_separated(&alphas, 1e-3));
        let k = alphas.len();
        let mut p = distinct_q_inverse(&alphas);
        for s in 0..k - 1 {
            p[(s, s)] += C64::new(1.0, 0.0);
        }
        let prod = p * distinct_p_inverse(&alphas);
        let err = (prod - CMat::identity(k, k)).norm();
        prop_assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn incremental_qr_reproduces_columns(seed in 0u64..10_000, n in 4usize..20, blocks in 1usize..5) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut qr = IncrementalQr::new();
        let mut all = CMat::zeros(n, 0);
        for _ in 0..blocks {
            let w = CMat::from_fn(n, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            qr.push_columns(&w);
            let k = all.ncols();
            all = all.insert_columns(k, 2, C64::new(0.0, 0.0));
            all.columns_mut(k, 2).copy_from(&w);
        }
        let q = qr.q_factor();
        let r = qr.r_factor();
        let ortho = (q.adjoint() * &q - CMat::identity(q.ncols(), q.ncols())).norm();
        prop_assert!(ortho < 1e-12, "{ortho}");
        let recon = (&q * r - &all).norm() / all.norm();
        prop_assert!(recon < 1e-12, "{recon}");
    }

    #[test]
    fn ilrsi_iterates_are_hermitian_psd_with_exact_residual(
        seed in 0u64..10_000,
        n in 6usize..24,
        shifts in real_shifts(4),
        steps in 1usize..8,
    ) {
        let problem = random_stable_problem(n, 1, 2, seed).unwrap();
        let seq = ShiftSequence::new(shifts, ShiftOrigin::User).unwrap();
        let opts = IlrsiOptions { tol: 1e-300, max_iter: steps, ..IlrsiOptions::default() };
        let (sol, _) = ilrsi_solve(&problem, &seq, &opts).unwrap();
        let x = sol.to_dense().unwrap();
        let xn = x.norm().max(1e-300);
        prop_assert!((&x - x.adjoint()).norm() <= 1e-12 * xn);
        prop_assert!(hermitian_min_eig(&x) >= -1e-12 * xn);
        let r = dense_residual(&problem, &x);
        let a = problem.a().to_dense_complex();
        let b = problem.b().map(|v| C64::new(v, 0.0));
        let scale = 2.0 * (a.adjoint() * &x).norm() + (&x * &b * b.adjoint() * &x).norm() + problem.g_norm();
        let lowrank = residual_norm(&problem, &sol).unwrap();
        prop_assert!((lowrank - r.norm()).abs() <= 1e-12 * scale, "{lowrank} vs {}", r.norm());
    }

    #[test]
    fn sylvester_identity_holds_on_distinct_basis(seed in 0u64..10_000, n in 8usize..24, shifts in real_shifts(3)) {
        prop_assume!(well_separated(&shifts, 0.3));
        let problem = random_stable_problem(n, 1, 2, seed).unwrap();
        let data = build_distinct_basis(&problem, &shifts).unwrap();
        let rel = check_sylvester_identity(&data) / data.t.norm();
        prop_assert!(rel < 1e-10, "{rel}");
        prop_assert!(hermitian_min_eig(&data.t) > 0.0);
    }

    /// Spectra enter mirrored into the right half-plane.
    #[test]
    fn rational_objective_is_a_contraction(
        shifts in proptest::collection::vec(shift(), 1..5),
        spectrum in proptest::collection::vec((0.05f64..10.0, -5.0f64..5.0), 1..12),
    ) {
        let spectrum: Vec<C64> = spectrum.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        let v = rational_objective(&shifts, &spectrum).unwrap();
        prop_assert!((0.0..1.0).contains(&v), "{v}");
    }

    #[test]
    fn closing_adds_missing_conjugates(shifts in proptest::collection::vec(shift(), 1..6)) {
        let seq = ShiftSequence::closing(shifts.clone(), ShiftOrigin::User).unwrap();
        let s = seq.as_slice();
        prop_assert!(s.len() >= shifts.len());
        for z in s {
            prop_assert!(s.iter().any(|w| (w - z.conj()).norm() <= 1e-12 * z.norm()));
        }
    }
}
