mod common;

use lure::cones::{is_doubly_dominant, is_doubly_hyperdominant, ConeSpec};
use lure::lmi::ozf_multiplier;
use lure::matrix::{
    project_psd, rank_one_factor, smat, svec, sym_eig, SymMatrix, DEFAULT_RANK_TOL,
};
use lure::witness::{pwl_through, verify_slope, DEFAULT_SLOPE_TOL};
use lure::SlopeBand;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym(seed: u64, n: usize) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SymMatrix::new(common::random_symmetric(&mut rng, n)).unwrap()
}

fn fro(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_projection_is_idempotent_and_lands_in_cone(seed: u64, n in 1usize..7) {
        let x = sym(seed, n);
        let p = project_psd(&x).unwrap();
        prop_assert!(sym_eig(&p).unwrap().min() >= -1e-12 * (1.0 + x.frobenius_norm()));
        let pp = project_psd(&p).unwrap();
        prop_assert!(fro(&(pp.as_matrix() - p.as_matrix())) <= 1e-10 * (1.0 + p.frobenius_norm()));
    }

    #[test]
    fn psd_projection_is_nonexpansive(s1: u64, s2: u64, n in 1usize..7) {
        let (x, y) = (sym(s1, n), sym(s2, n));
        let (px, py) = (project_psd(&x).unwrap(), project_psd(&y).unwrap());
        let lhs = fro(&(px.as_matrix() - py.as_matrix()));
        let rhs = fro(&(x.as_matrix() - y.as_matrix()));
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn psd_projection_matches_cone_projection(seed: u64, n in 1usize..6) {
        let x = sym(seed, n);
        let via_cone = smat(&ConeSpec::Psd(n).project(&svec(&x)).unwrap()).unwrap();
        let direct = project_psd(&x).unwrap();
        prop_assert!(fro(&(via_cone.as_matrix() - direct.as_matrix())) < 1e-10);
    }

    #[test]
    fn svec_is_an_isometry(s1: u64, s2: u64, n in 1usize..8) {
        let (x, y) = (sym(s1, n), sym(s2, n));
        let (vx, vy) = (svec(&x), svec(&y));
        let dot: f64 = vx.iter().zip(&vy).map(|(a, b)| a * b).sum();
        let tr = (x.as_matrix() * y.as_matrix()).trace();
        prop_assert!((dot - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        let back = smat(&vx).unwrap();
        prop_assert!(fro(&(back.as_matrix() - x.as_matrix())) <= 1e-15 * (1.0 + x.frobenius_norm()));
    }

    #[test]
    fn eigendecomposition_reconstructs(seed: u64, n in 1usize..8) {
        let x = sym(seed, n);
        let e = sym_eig(&x).unwrap();
        let err = fro(&(e.reconstruct().as_matrix() - x.as_matrix()));
        prop_assert!(err <= 1e-11 * (1.0 + x.frobenius_norm()));
        let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
        prop_assert!(fro(&(vtv - DMatrix::identity(n, n))) < 1e-11);
        for k in 1..n {
            prop_assert!(e.eigenvalues[k - 1] >= e.eigenvalues[k]);
        }
    }

    #[test]
    fn rank_one_factor_recovers_generator(v in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
        let h = DVector::from_vec(v);
        prop_assume!(h.norm() > 1e-3);
        let f = rank_one_factor(&SymMatrix::outer(&h), DEFAULT_RANK_TOL).unwrap().expect("rank one");
        let err = (&f - &h).amax().min((&f + &h).amax());
        prop_assert!(err <= 1e-9 * (1.0 + h.amax()), "err {}", err);
    }

    #[test]
    fn odd_maps_are_odd(seed: u64, z in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = common::random_slope_map(&mut rng, true);
        prop_assert!((phi.eval(-z) + phi.eval(z)).abs() <= 1e-12 * (1.0 + z.abs()));
    }

    #[test]
    fn interpolant_is_scale_covariant(seed: u64, s in 0.01f64..100.0, t in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..6);
        let z = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let w = z.map(|v| v * rng.random_range(0.0..1.0));
        let (base, scaled) = match (pwl_through(&z, &w, false), pwl_through(&(&z * s), &(&w * s), false)) {
            (Ok(b), Ok(c)) => (b, c),
            _ => return Ok(()),
        };
        prop_assert!((scaled.eval(s * t) - s * base.eval(t)).abs() <= 1e-10 * s * (1.0 + t.abs()));
    }

    #[test]
    fn slope_restricted_maps_pass_the_secant_check(seed: u64, odd: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = common::random_slope_map(&mut rng, odd);
        prop_assert!(phi.segment_slopes().iter().all(|&k| (-1e-12..=1.0 + 1e-12).contains(&k)));
        prop_assert!(verify_slope(&phi, SlopeBand::unit(), 500, DEFAULT_SLOPE_TOL, &mut rng));
    }

    #[test]
    // one repeated map acts on every channel
    fn hyperdominant_multiplier_form_is_nonnegative(seed: u64, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mm = common::random_dhd(&mut rng, m);
        prop_assert!(is_doubly_hyperdominant(&mm, 1e-12));
        let phi = common::random_slope_map(&mut rng, false);
        let zeta = DVector::from_fn(m, |_, _| rng.random_range(-4.0..4.0));
        let w = zeta.map(|z| phi.eval(z));
        let q = common::lemma_form_direct(&mm, &zeta, &w);
        prop_assert!(q >= -1e-10 * (1.0 + mm.amax() * zeta.norm_squared()), "form {}", q);
    }

    #[test]
    fn dominant_multiplier_form_is_nonnegative_for_odd_maps(seed: u64, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mm = common::random_dd(&mut rng, m);
        prop_assert!(is_doubly_dominant(&mm, 1e-12));
        let phi = common::random_slope_map(&mut rng, true);
        let zeta = DVector::from_fn(m, |_, _| rng.random_range(-4.0..4.0));
        let w = zeta.map(|z| phi.eval(z));
        let q = common::lemma_form_direct(&mm, &zeta, &w);
        prop_assert!(q >= -1e-10 * (1.0 + mm.amax() * zeta.norm_squared()), "form {}", q);
    }

    #[test]
    fn assembled_multiplier_matches_direct_form(seed: u64, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mm = common::normal_matrix(&mut rng, m, m);
        let zeta = DVector::from_fn(m, |_, _| common::normal(&mut rng));
        let w = DVector::from_fn(m, |_, _| common::normal(&mut rng));
        let pi = ozf_multiplier(&mm, SlopeBand::unit()).unwrap();
        let v = DVector::from_iterator(2 * m, zeta.iter().chain(w.iter()).copied());
        let assembled = v.dot(&(pi.as_matrix() * &v));
        let direct = common::lemma_form_direct(&mm, &zeta, &w);
        prop_assert!((assembled - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn zero_diag_z_projection_is_idempotent(seed: u64, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cone = ConeSpec::ZeroDiagZ(m);
        let x: Vec<f64> = (0..m * m).map(|_| common::normal(&mut rng)).collect();
        let p = cone.project(&x).unwrap();
        prop_assert!(cone.distance(&p).unwrap() < 1e-14);
        prop_assert_eq!(cone.project(&p).unwrap(), p.clone());
        for i in 0..m {
            prop_assert_eq!(p[i * m + i], 0.0);
        }
    }
}
