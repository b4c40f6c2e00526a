//! Samples the quadratic form of the OZF multiplier on signals passed through
//! slope-restricted maps. The form stays nonnegative for doubly hyperdominant
//! `M` and any such map, and for doubly dominant `M` when the map is odd. A
//! non-odd map can break the doubly dominant case.

use lure::cones::{is_doubly_dominant, is_doubly_hyperdominant, DEFAULT_MEMBERSHIP_TOL};
use lure::lmi::{ozf_multiplier, SlopeBand};
use lure::PiecewiseLinear;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn form(m: &DMatrix<f64>, phi: &PiecewiseLinear, zeta: &DVector<f64>) -> f64 {
    let k = zeta.len();
    let mut v = DVector::zeros(2 * k);
    v.rows_mut(0, k).copy_from(zeta);
    v.rows_mut(k, k).copy_from(&zeta.map(|z| phi.eval(z)));
    let pi = ozf_multiplier(m, SlopeBand::unit()).unwrap();
    v.dot(&(pi.as_matrix() * &v))
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // M = [[1, 1], [0, 1]] is doubly dominant but not a Z-matrix
    let dd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let dhd = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -0.5, 1.0]);
    assert!(is_doubly_dominant(&dd, DEFAULT_MEMBERSHIP_TOL));
    assert!(is_doubly_hyperdominant(&dhd, DEFAULT_MEMBERSHIP_TOL));

    // a dead zone then unit slope, not odd
    let one_sided = PiecewiseLinear::new(vec![(0.0, 0.0), (1.0, 0.0), (3.0, 2.0)]).unwrap();
    let odd =
        PiecewiseLinear::new(vec![(-2.0, -1.0), (-1.0, -1.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();

    let mut worst = [f64::INFINITY; 3];
    for _ in 0..20_000 {
        let zeta = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
        worst[0] = worst[0].min(form(&dhd, &one_sided, &zeta));
        worst[1] = worst[1].min(form(&dd, &odd, &zeta));
        worst[2] = worst[2].min(form(&dd, &one_sided, &zeta));
    }
    println!(
        "doubly hyperdominant M, non-odd phi: min form = {:.4}",
        worst[0]
    );
    println!(
        "doubly dominant M, odd phi:          min form = {:.4}",
        worst[1]
    );
    println!(
        "doubly dominant M, non-odd phi:      min form = {:.4}",
        worst[2]
    );
}
