//! Runs the full analysis on the built-in slope-restricted example with
//! doubly hyperdominant multipliers and prints the instability witness.
//!
//! ```text
//! cargo run --release --example certify_dhd
//! ```

use lure::lmi::{MultiplierClass, SlopeBand};
use lure::system::dhd_counterexample;
use lure::{certify, CertifyOptions};

fn fmt(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:8.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> lure::Result<()> {
    let sys = dhd_counterexample();
    println!(
        "||D||_2 = {:.4}, spectral abscissa of A = {:.4}",
        sys.d_norm(),
        sys.spectral_abscissa()
    );

    let v = certify(
        &sys,
        MultiplierClass::Dhd,
        SlopeBand::unit(),
        &CertifyOptions::default(),
    )?;
    println!("verdict: {:?}", v.verdict);
    for note in &v.notes {
        println!("  {note}");
    }
    if let Some(w) = &v.witness {
        println!("h1 = {}", fmt(&w.h1));
        println!("w* = {}", fmt(&w.w_star));
        println!("z* = {}", fmt(&w.z_star));
        println!("phi_wc breakpoints (z, phi(z)):");
        for [z, p] in &w.breakpoints {
            println!("  {z:8.4} {p:8.4}");
        }
    }
    Ok(())
}
