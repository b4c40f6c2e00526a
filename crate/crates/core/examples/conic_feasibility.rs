//! The conic engine on its own: a small theorem-of-alternatives pair.
//!
//! Side one asks for `Y ⪰ 0` with `Y = T`. Side two asks for a separating
//! `W ⪰ 0` with `⟨W, T⟩ ≤ 0` and `trace W = 1`. Exactly one of them can hold
//! (up to the boundary), and the paired solve labels the other infeasible.

use lure::cones::ConeSpec;
use lure::matrix::{smat, svec, SymMatrix};
use lure::sdp::{solve_alternative_pair, ConicFeasibilityProblem, ProblemBuilder, SolverConfig};
use nalgebra::DMatrix;

fn pair(target: &SymMatrix) -> lure::Result<(ConicFeasibilityProblem, ConicFeasibilityProblem)> {
    let k = target.dim();
    let mut b = ProblemBuilder::new();
    b.add_block("Y", ConeSpec::Psd(k));
    b.add_rows(&svec(target), |y| y.to_vec());
    let first = b.build()?;

    let t = svec(target);
    let mut b = ProblemBuilder::new();
    let w = b.add_block("W", ConeSpec::Psd(k));
    let s = b.add_block("slack", ConeSpec::NonnegOrthant(1));
    b.add_rows(&[0.0], |y| {
        let inner: f64 = t
            .iter()
            .zip(&y[w.offset..w.offset + w.len])
            .map(|(a, b)| a * b)
            .sum();
        vec![inner + y[s.offset]]
    });
    b.set_normalization(1.0, |y| {
        smat(&y[w.offset..w.offset + w.len]).unwrap().trace()
    });
    Ok((first, b.build()?))
}

fn main() -> lure::Result<()> {
    let cfg = SolverConfig::default();
    for (label, t) in [
        (
            "positive definite",
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        ),
        (
            "indefinite",
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        ),
        ("negative definite", -DMatrix::identity(2, 2)),
    ] {
        let (a, b) = pair(&SymMatrix::new(t)?)?;
        let (ra, rb) = solve_alternative_pair(&a, &b, &cfg)?;
        println!(
            "{label:>18}: Y = T, Y psd -> {:?}; separator -> {:?}",
            ra.status, rb.status
        );
        println!("{:>18}  {}", "", rb.certificate_note);
    }
    Ok(())
}
