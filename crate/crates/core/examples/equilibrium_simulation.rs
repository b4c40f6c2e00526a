//! Closes the loop with the extracted nonlinearity and integrates from the
//! witness state and from a nearby point. Trajectories and the planar vector
//! field are written as CSV into the directory given as the first argument
//! (default: the system temp dir).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use lure::lmi::{MultiplierClass, SlopeBand};
use lure::simulate::{
    integrate, vector_field_grid, verify_equilibrium, write_vector_field_csv, SimOptions,
};
use lure::system::dhd_counterexample;
use lure::{certify, CertifyOptions};
use nalgebra::DVector;

fn main() -> lure::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let sys = dhd_counterexample();
    let v = certify(
        &sys,
        MultiplierClass::Dhd,
        SlopeBand::unit(),
        &CertifyOptions::default(),
    )?;
    let (Some(w), Some(phi)) = (v.dual_witness, v.phi) else {
        println!("no witness; verdict {:?}", v.verdict);
        return Ok(());
    };

    let eq = verify_equilibrium(&sys, &phi, &w.h1, 1e-6)?;
    println!("|A h1 + B phi(z(h1))|_inf = {:.2e}", eq.residual);

    let still = integrate(&sys, &phi, &w.h1, &SimOptions::default())?;
    println!(
        "max_t |x(t) - h1|_inf over [0, 10] = {:.2e}",
        still.max_deviation_from(&w.h1)
    );

    let x0 = DVector::from_vec(vec![-0.5, -0.5]);
    let opts = SimOptions {
        t_end: 100.0,
        ..Default::default()
    };
    let decay = integrate(&sys, &phi, &x0, &opts)?;
    for t in [0.0, 10.0, 25.0, 50.0, 100.0] {
        println!("|x({t:>5})| = {:.3e}", decay.state_at(t).unwrap().norm());
    }

    decay.write_csv(BufWriter::new(File::create(
        dir.join("lure_trajectory.csv"),
    )?))?;
    let field = vector_field_grid(&sys, &phi, (-2.0, 2.0), (-2.0, 2.0), 25)?;
    write_vector_field_csv(
        &field,
        BufWriter::new(File::create(dir.join("lure_field.csv"))?),
    )?;
    println!("wrote {}", dir.join("lure_trajectory.csv").display());
    Ok(())
}
