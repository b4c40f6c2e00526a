//! A weakly coupled plant passes the primal LMI, giving a Lyapunov matrix and
//! a doubly hyperdominant multiplier as a stability certificate.

use lure::lmi::{MultiplierClass, SlopeBand};
use lure::{certify, CertifyOptions, StateSpace};
use nalgebra::DMatrix;

fn main() -> lure::Result<()> {
    let sys = StateSpace::new(
        -DMatrix::identity(2, 2),
        DMatrix::identity(2, 2) * 0.1,
        DMatrix::identity(2, 2) * 0.1,
        DMatrix::zeros(2, 2),
    )?;
    for class in [MultiplierClass::Dhd, MultiplierClass::Dd] {
        let v = certify(&sys, class, SlopeBand::unit(), &CertifyOptions::default())?;
        println!("{class}: {:?}", v.verdict);
        if let Some(c) = &v.primal_certificate {
            println!("  P = {:?}", c.p);
            println!("  M = {:?}", c.m);
            println!("  max eig of LMI = {:.3e}", c.check.lmi_max_eig);
        }
    }

    // the primal also accepts sector-like bands other than [0, 1]
    let band = SlopeBand::new(-0.5, 2.0)?;
    let v = certify(&sys, MultiplierClass::Dhd, band, &CertifyOptions::default())?;
    println!("band [-0.5, 2]: {:?}", v.verdict);
    Ok(())
}
