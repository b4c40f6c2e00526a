//! Absolute stability of Lur'e systems `ẋ = Ax + Bw`, `z = Cx + Dw`,
//! `w = Φ(z)` with slope-restricted diagonal nonlinearities.
//!
//! The static OZF multiplier LMI either certifies stability ([`lmi::build_primal`])
//! or its dual ([`lmi::build_dual`]) is feasible. A rank-one dual solution
//! yields an explicit destabilizing piecewise-linear nonlinearity and a nonzero
//! equilibrium ([`witness`]), which [`simulate`] confirms in closed loop.

pub mod analysis;
pub mod cli;
pub mod cones;
pub mod error;
pub mod lmi;
pub mod matrix;
pub mod sdp;
pub mod simulate;
pub mod system;
pub mod witness;

pub use analysis::{certify, AnalysisVerdict, CertifyOptions, Verdict};
pub use error::{Error, Result};
pub use lmi::{MultiplierClass, SlopeBand};
pub use system::StateSpace;
pub use witness::{DualWitness, PiecewiseLinear};
