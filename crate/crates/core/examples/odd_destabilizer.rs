//! Doubly dominant multipliers are only valid for odd nonlinearities, so the
//! witness extracted from the dual is turned into an odd piecewise-linear map.
//! The example checks the map's oddness and slope bounds directly.

use lure::lmi::{MultiplierClass, SlopeBand};
use lure::system::dd_counterexample;
use lure::witness::{verify_slope, DEFAULT_SLOPE_TOL};
use lure::{certify, CertifyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lure::Result<()> {
    let sys = dd_counterexample();
    let v = certify(
        &sys,
        MultiplierClass::Dd,
        SlopeBand::unit(),
        &CertifyOptions::default(),
    )?;
    println!("verdict: {:?}", v.verdict);

    let (Some(w), Some(phi)) = (&v.dual_witness, &v.phi) else {
        println!("no witness: {:?}", v.notes);
        return Ok(());
    };
    println!("h1 = {:.4?}", w.h1.as_slice());
    println!("z* = {:.4?}", w.z_star.as_slice());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let worst_odd = (0..1000)
        .map(|_| {
            let z: f64 = rng.random_range(-3.0..3.0);
            (phi.eval(z) + phi.eval(-z)).abs()
        })
        .fold(0.0, f64::max);
    println!("max |phi(z) + phi(-z)| over 1000 samples: {worst_odd:.2e}");
    println!(
        "slope within [0, 1]: {}",
        verify_slope(phi, SlopeBand::unit(), 10_000, DEFAULT_SLOPE_TOL, &mut rng)
    );
    println!("segment slopes: {:.4?}", phi.segment_slopes());
    Ok(())
}
