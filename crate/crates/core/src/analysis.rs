//! End-to-end stability analysis: primal certificate or dual instability
//! witness, each re-verified from raw matrices before a verdict is issued.

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{self, check_primal, DualOptions, MultiplierClass, PrimalCheck, SlopeBand};
use crate::sdp::{self, SolveReport, SolveStatus, SolverConfig};
use crate::simulate::{verify_equilibrium, EquilibriumReport};
use crate::system::StateSpace;
use crate::witness::{
    self, DualWitness, PiecewiseLinear, WitnessFile, WitnessTolerances, DEFAULT_SLOPE_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    AbsolutelyStable,
    NotAbsolutelyStable,
    Undetermined,
}

impl Verdict {
    /// Process exit code reported by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::AbsolutelyStable => 0,
            Verdict::NotAbsolutelyStable => 2,
            Verdict::Undetermined => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Strictness of the primal LMI; `None` picks [`lmi::default_eps`].
    pub eps: Option<f64>,
    pub solver: SolverConfig,
    pub dual: DualOptions,
    pub witness: WitnessTolerances,
    /// Equilibrium tolerance relative to `‖h‖`.
    pub equilibrium_tol: f64,
    /// Random secants checked on the extracted nonlinearity.
    pub slope_samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            eps: None,
            solver: SolverConfig::default(),
            dual: DualOptions::default(),
            witness: WitnessTolerances::default(),
            equilibrium_tol: 1e-6,
            slope_samples: 10_000,
            seed: 42,
        }
    }
}

/// Primal certificate in plain nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalCertificate {
    pub p: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub check: PrimalCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisVerdict {
    pub verdict: Verdict,
    pub class: MultiplierClass,
    pub band: SlopeBand,
    pub primal_report: SolveReport,
    pub dual_report: Option<SolveReport>,
    pub primal_certificate: Option<PrimalCertificate>,
    pub witness: Option<WitnessFile>,
    pub equilibrium: Option<EquilibriumReport>,
    pub slope_verified: Option<bool>,
    pub notes: Vec<String>,
    /// Not serialized; kept for callers that need the full dual blocks.
    #[serde(skip)]
    pub dual_witness: Option<DualWitness>,
    #[serde(skip)]
    pub phi: Option<PiecewiseLinear>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs the primal and, for the band `[0, 1]`, the dual problem, then turns
/// whichever side is feasible into a verified verdict.
///
/// A feasible report that fails its independent re-check is an error
/// ([`Error::SolverInconsistency`]); a feasible dual whose solution is not rank
/// one, or whose witness fails a check, yields `Undetermined`.
pub fn certify(
    sys: &StateSpace,
    class: MultiplierClass,
    band: SlopeBand,
    opts: &CertifyOptions,
) -> Result<AnalysisVerdict> {
    let mut notes = Vec::new();
    let (primal, playout) = lmi::build_primal(sys, band, class, opts.eps)?;
    let dual = if band.is_unit() {
        Some(lmi::build_dual(sys, band, class, opts.dual)?)
    } else {
        notes.push(format!(
            "dual LMI only implemented for slope [0, 1]; band [{}, {}] gets the primal test only",
            band.mu, band.nu
        ));
        None
    };
    if !sys.is_d_contractive() {
        notes.push(format!(
            "||D||_2 = {:.4} >= 1; loop well-posedness rests on det(I - D*Delta) > 0 at every vertex",
            sys.d_norm()
        ));
    }

    let (primal_report, dual_report) = match &dual {
        Some((dp, _)) => {
            let (p, d) = sdp::solve_alternative_pair(&primal, dp, &opts.solver)?;
            (p, Some(d))
        }
        None => (sdp::solve(&primal, &opts.solver)?, None),
    };
    info!(
        "primal {:?} after {} iterations; dual {:?}",
        primal_report.status,
        primal_report.iterations,
        dual_report.as_ref().map(|d| d.status)
    );

    let mut out = AnalysisVerdict {
        verdict: Verdict::Undetermined,
        class,
        band,
        primal_report,
        dual_report,
        primal_certificate: None,
        witness: None,
        equilibrium: None,
        slope_verified: None,
        notes,
        dual_witness: None,
        phi: None,
    };

    if out.primal_report.status == SolveStatus::Feasible {
        let point = out
            .primal_report
            .point
            .as_ref()
            .expect("feasible report has a point");
        let vars = playout.decode(&primal, point)?;
        let membership_tol = 10.0 * opts.solver.eq_tol;
        let check = check_primal(sys, band, class, &vars, playout.eps, membership_tol)?;
        if !check.certifies() {
            return Err(Error::SolverInconsistency(format!(
                "primal point fails re-check: {check:?}"
            )));
        }
        out.notes.push(format!(
            "primal LMI feasible: max eig {:.3e}, min eig(P) {:.3e}",
            check.lmi_max_eig, check.p_min_eig
        ));
        out.primal_certificate = Some(PrimalCertificate {
            p: rows(&vars.p),
            m: rows(&vars.m),
            check,
        });
        out.verdict = Verdict::AbsolutelyStable;
        return Ok(out);
    }

    let Some((dp, dlayout)) = &dual else {
        out.notes.push("primal LMI not found feasible".into());
        return Ok(out);
    };
    let dual_report = out.dual_report.as_ref().expect("dual was solved");
    if dual_report.status != SolveStatus::Feasible {
        out.notes
            .push("neither the primal nor the dual LMI was found feasible".into());
        return Ok(out);
    }

    let w = match witness::extract(dual_report, dp, dlayout, sys, &opts.witness) {
        Ok(w) => w,
        Err(Error::NotRankOne { ratio }) => {
            out.notes.push(format!(
                "dual feasible but the solution is not rank one (eigenvalue ratio {ratio:.3e}); no conclusion"
            ));
            return Ok(out);
        }
        Err(Error::InconsistentWitness(msg)) => {
            warn!("witness rejected: {msg}");
            out.notes
                .push(format!("dual feasible but witness rejected: {msg}"));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };

    let odd = class.requires_odd();
    let phi = witness::build_pwl(&w, odd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let slope_ok = witness::verify_slope(
        &phi,
        SlopeBand::unit(),
        opts.slope_samples,
        DEFAULT_SLOPE_TOL,
        &mut rng,
    );
    let h_norm = (w.h1.norm_squared() + w.h2.norm_squared()).sqrt();
    let eq = verify_equilibrium(sys, &phi, &w.h1, opts.equilibrium_tol * h_norm)?;
    out.slope_verified = Some(slope_ok);
    out.witness = Some(WitnessFile::new(&w, &phi, odd));

    if slope_ok && eq.is_equilibrium {
        out.notes.push(format!(
            "rank-one dual witness (ratio {:.2e}); x = h1 is a nonzero equilibrium (residual {:.2e}) under the {}slope-[0,1] map phi_wc",
            w.residuals.rank_ratio,
            eq.residual,
            if odd { "odd " } else { "" }
        ));
        out.verdict = Verdict::NotAbsolutelyStable;
    } else {
        out.notes.push(format!(
            "witness failed verification (slope ok: {slope_ok}, equilibrium residual {:.3e})",
            eq.residual
        ));
    }
    out.equilibrium = Some(eq);
    out.dual_witness = Some(w);
    out.phi = Some(phi);
    Ok(out)
}

/// Cosine of the angle between two vectors, `0` if either vanishes.
pub fn direction_cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        a.dot(b) / d
    }
}
