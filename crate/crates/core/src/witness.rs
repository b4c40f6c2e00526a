//! Instability witnesses: rank-one factorization of a dual solution, the
//! equilibrium pair `(z*, w*)`, and the destabilizing piecewise-linear
//! nonlinearity `φ_wc` that realizes it.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lmi::{check_dual, DualCheck, DualLayout, MultiplierClass, SlopeBand};
use crate::matrix::{rank_one_ratio, SymMatrix, DEFAULT_RANK_TOL};
use crate::sdp::{ConicFeasibilityProblem, SolveReport, SolveStatus};
use crate::system::StateSpace;

/// Tolerances applied while extracting and checking a witness.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WitnessTolerances {
    /// Largest accepted `max(|λ₂|, |λ_min|) / λ₁`.
    pub rank_tol: f64,
    /// `‖Ah₁ + Bh₂‖∞ ≤ equilibrium_tol·‖h‖`.
    pub equilibrium_tol: f64,
    /// Smallest accepted slope-consistency product.
    pub slope_tol: f64,
    /// Bound on the raw dual constraint residuals when re-checking.
    pub recheck_tol: f64,
}

impl Default for WitnessTolerances {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            equilibrium_tol: 1e-6,
            slope_tol: 1e-8,
            recheck_tol: 1e-7,
        }
    }
}

/// Diagnostics recorded with a witness.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WitnessResiduals {
    pub rank_ratio: f64,
    /// `‖Ah₁ + Bh₂‖∞`.
    pub equilibrium: f64,
    /// Smallest slope-consistency product (nonnegative for a valid witness).
    pub slope_min: f64,
    pub dual: DualCheck,
}

/// A rank-one dual solution `H = hhᵀ`, `h = (h₁, h₂)`, together with the
/// equilibrium data `z* = Ch₁ + Dh₂`, `w* = h₂`.
#[derive(Debug, Clone)]
pub struct DualWitness {
    pub class: MultiplierClass,
    pub h: SymMatrix,
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: Option<DMatrix<f64>>,
    pub h1: DVector<f64>,
    pub h2: DVector<f64>,
    pub z_star: DVector<f64>,
    pub w_star: DVector<f64>,
    pub residuals: WitnessResiduals,
}

/// Smallest of the products that must be nonnegative for a slope-`[0, 1]`
/// map through `(0, 0)` and every `(z*_i, w*_i)` to exist:
/// `w_i(z_i − w_i)`, `(w_i − w_j)((z_i − z_j) − (w_i − w_j))`, and for odd maps
/// also `(w_i + w_j)((z_i + z_j) − (w_i + w_j))`.
pub fn slope_consistency_min(z: &DVector<f64>, w: &DVector<f64>, odd: bool) -> f64 {
    let m = z.len();
    let prod = |dz: f64, dw: f64| dw * (dz - dw);
    let mut worst = f64::INFINITY;
    for i in 0..m {
        worst = worst.min(prod(z[i], w[i]));
        for j in i + 1..m {
            worst = worst.min(prod(z[i] - z[j], w[i] - w[j]));
            if odd {
                worst = worst.min(prod(z[i] + z[j], w[i] + w[j]));
            }
        }
    }
    if worst.is_infinite() {
        0.0
    } else {
        worst
    }
}

/// Factors a feasible dual solution and verifies every witness property.
///
/// A report that claims feasibility but fails the independent dual re-check is
/// a [`Error::SolverInconsistency`]; a solution of rank above one is
/// [`Error::NotRankOne`].
pub fn extract(
    report: &SolveReport,
    problem: &ConicFeasibilityProblem,
    layout: &DualLayout,
    sys: &StateSpace,
    tols: &WitnessTolerances,
) -> Result<DualWitness> {
    if report.status != SolveStatus::Feasible {
        return Err(invalid(format!(
            "dual report is {:?}, not Feasible",
            report.status
        )));
    }
    let point = report
        .point
        .as_ref()
        .ok_or_else(|| Error::SolverInconsistency("feasible report carries no point".into()))?;
    let vars = layout.decode(problem, point)?;
    let class = layout.class;
    let dual = check_dual(sys, class, &vars)?;
    if !dual.passes(tols.recheck_tol, tols.recheck_tol) {
        return Err(Error::SolverInconsistency(format!(
            "dual point fails re-check: {dual:?}"
        )));
    }

    let (ratio, h) = rank_one_ratio(&vars.h)?;
    if ratio > tols.rank_tol {
        return Err(Error::NotRankOne { ratio });
    }
    let (n, m) = (sys.n(), sys.m());
    let h1 = h.rows(0, n).into_owned();
    let h2 = h.rows(n, m).into_owned();
    let h_norm = h.norm();
    if h1.norm() <= 1e-8 * h_norm {
        return Err(Error::InconsistentWitness(
            "state part h1 of the rank-one factor vanishes".into(),
        ));
    }
    let equilibrium = (&sys.a * &h1 + &sys.b * &h2).amax();
    if equilibrium > tols.equilibrium_tol * h_norm {
        return Err(Error::InconsistentWitness(format!(
            "A h1 + B h2 = {equilibrium:.3e} exceeds {:.1e} * |h|",
            tols.equilibrium_tol
        )));
    }
    let z_star = &sys.c * &h1 + &sys.d * &h2;
    let w_star = h2.clone();
    let slope_min = slope_consistency_min(&z_star, &w_star, class.requires_odd());
    if slope_min < -tols.slope_tol {
        return Err(Error::InconsistentWitness(format!(
            "slope consistency product {slope_min:.3e} below -{:.1e}",
            tols.slope_tol
        )));
    }

    Ok(DualWitness {
        class,
        h: vars.h,
        f: vars.f,
        g: vars.g,
        x: vars.x,
        z: vars.z,
        h1,
        h2,
        z_star,
        w_star,
        residuals: WitnessResiduals {
            rank_ratio: ratio,
            equilibrium,
            slope_min,
            dual,
        },
    })
}

/// A continuous piecewise-linear scalar map, constant outside its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    /// `(z̄_i, w̄_i)` with strictly increasing `z̄`.
    breakpoints: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Validates ordering and finiteness. Values beyond the outer breakpoints
    /// are the outer `w̄`.
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(invalid(
                "piecewise-linear map needs at least one breakpoint",
            ));
        }
        if breakpoints
            .iter()
            .any(|(z, w)| !z.is_finite() || !w.is_finite())
        {
            return Err(invalid("breakpoints must be finite"));
        }
        if breakpoints.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(invalid("breakpoints must be strictly increasing in z"));
        }
        Ok(Self { breakpoints })
    }

    /// `φ ≡ 0`.
    pub fn zero() -> Self {
        Self {
            breakpoints: vec![(0.0, 0.0)],
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn left_value(&self) -> f64 {
        self.breakpoints[0].1
    }

    pub fn right_value(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].1
    }

    pub fn eval(&self, z: f64) -> f64 {
        let bp = &self.breakpoints;
        let k = bp.partition_point(|&(zb, _)| zb <= z);
        if k == 0 {
            return self.left_value();
        }
        if k == bp.len() {
            return self.right_value();
        }
        let (z0, w0) = bp[k - 1];
        let (z1, w1) = bp[k];
        if z == z0 {
            return w0;
        }
        w0 + (w1 - w0) * (z - z0) / (z1 - z0)
    }

    /// Right derivative at `z` (zero outside the breakpoint range).
    pub fn slope_at(&self, z: f64) -> f64 {
        let bp = &self.breakpoints;
        let k = bp.partition_point(|&(zb, _)| zb <= z);
        if k == 0 || k == bp.len() {
            return 0.0;
        }
        let (z0, w0) = bp[k - 1];
        let (z1, w1) = bp[k];
        (w1 - w0) / (z1 - z0)
    }

    /// Slopes of the interior segments, left to right.
    pub fn segment_slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
            .collect()
    }
}

/// Interpolates `(0, 0)` and every `(z*_i, w*_i)` (and their negatives when
/// `odd`), sorted by `z`, with constant extension outside the data.
///
/// Points whose `z` agree within `1e-9·(1 + max|z*|)` are merged; if their `w`
/// disagree by more than the same tolerance the witness is inconsistent.
pub fn build_pwl(witness: &DualWitness, odd: bool) -> Result<PiecewiseLinear> {
    if odd && witness.class != MultiplierClass::Dd {
        return Err(invalid(
            "the odd construction needs a doubly dominant witness",
        ));
    }
    pwl_through(&witness.z_star, &witness.w_star, odd)
}

/// The construction behind [`build_pwl`] on raw data.
pub fn pwl_through(z: &DVector<f64>, w: &DVector<f64>, odd: bool) -> Result<PiecewiseLinear> {
    if z.len() != w.len() {
        return Err(invalid("z* and w* differ in length"));
    }
    let tol = 1e-9 * (1.0 + z.amax());
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for (&zi, &wi) in z.iter().zip(w.iter()) {
        pts.push((zi, wi));
        if odd {
            pts.push((-zi, -wi));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (zi, wi) in pts {
        match merged.last_mut() {
            Some(last) if (zi - last.0).abs() <= tol => {
                if (wi - last.1).abs() > tol {
                    return Err(Error::InconsistentWitness(format!(
                        "z = {zi:.6e} maps to both {:.6e} and {wi:.6e}",
                        last.1
                    )));
                }
                // keep the exact anchor at the origin
                if zi == 0.0 && wi == 0.0 {
                    *last = (0.0, 0.0);
                }
            }
            _ => merged.push((zi, wi)),
        }
    }
    PiecewiseLinear::new(merged)
}

/// Checks the segment slopes against `band` (widened by `tol`), then samples
/// `samples` random secants over a window twice as wide as the breakpoints.
pub fn verify_slope<R: Rng + ?Sized>(
    pwl: &PiecewiseLinear,
    band: SlopeBand,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> bool {
    let in_band = |s: f64| s >= band.mu - tol && s <= band.nu + tol;
    if !pwl.segment_slopes().into_iter().all(in_band) {
        return false;
    }
    let bp = pwl.breakpoints();
    let (lo, hi) = (bp[0].0, bp[bp.len() - 1].0);
    let pad = (hi - lo).max(1.0);
    for _ in 0..samples {
        let p = rng.random_range(lo - pad..hi + pad);
        let q = rng.random_range(lo - pad..hi + pad);
        if (p - q).abs() < 1e-9 * pad {
            continue;
        }
        if !in_band((pwl.eval(p) - pwl.eval(q)) / (p - q)) {
            return false;
        }
    }
    true
}

/// Default slack on segment slopes in [`verify_slope`].
pub const DEFAULT_SLOPE_TOL: f64 = 1e-7;

/// On-disk witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessFile {
    pub class: MultiplierClass,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub z_star: Vec<f64>,
    pub w_star: Vec<f64>,
    /// `[z̄, w̄]` pairs of `φ_wc`.
    pub breakpoints: Vec<[f64; 2]>,
    pub odd: bool,
    pub residuals: WitnessResiduals,
}

impl WitnessFile {
    pub fn new(witness: &DualWitness, pwl: &PiecewiseLinear, odd: bool) -> Self {
        Self {
            class: witness.class,
            h1: witness.h1.as_slice().to_vec(),
            h2: witness.h2.as_slice().to_vec(),
            z_star: witness.z_star.as_slice().to_vec(),
            w_star: witness.w_star.as_slice().to_vec(),
            breakpoints: pwl.breakpoints().iter().map(|&(z, w)| [z, w]).collect(),
            odd,
            residuals: witness.residuals,
        }
    }

    pub fn pwl(&self) -> Result<PiecewiseLinear> {
        PiecewiseLinear::new(self.breakpoints.iter().map(|p| (p[0], p[1])).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn zero_witness_gives_zero_map() {
        let p = pwl_through(&dv(&[0.0, 0.0]), &dv(&[0.0, 0.0]), false).unwrap();
        assert_eq!(p, PiecewiseLinear::zero());
        assert_eq!(p.eval(3.0), 0.0);
        assert_eq!(p.eval(-3.0), 0.0);
    }

    #[test]
    fn eval_breakpoints_and_midpoints() {
        let p = PiecewiseLinear::new(vec![(-1.0, -0.5), (0.0, 0.0), (2.0, 0.25)]).unwrap();
        assert_eq!(p.eval(-1.0), -0.5);
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(2.0), 0.25);
        assert_eq!(p.eval(-7.0), -0.5);
        assert_eq!(p.eval(9.0), 0.25);
        // two-point interpolation formula
        let (z0, w0, z1, w1) = (0.0, 0.0, 2.0, 0.25);
        let zm = 0.5 * (z0 + z1);
        assert!((p.eval(zm) - (w0 + (w1 - w0) / (z1 - z0) * (zm - z0))).abs() < 1e-15);
        assert_eq!(p.slope_at(1.0), 0.125);
        assert_eq!(p.slope_at(5.0), 0.0);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(PiecewiseLinear::new(vec![(1.0, 0.0), (0.0, 0.0)]).is_err());
        assert!(PiecewiseLinear::new(vec![]).is_err());
    }

    #[test]
    fn slope_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let clip = PiecewiseLinear::new(vec![(-1.0, -1.0), (1.0, 1.0)]).unwrap();
        assert!(verify_slope(
            &clip,
            SlopeBand::unit(),
            1000,
            1e-12,
            &mut rng
        ));
        let steep = PiecewiseLinear::new(vec![(0.0, 0.0), (1.0, 1.5)]).unwrap();
        assert!(!verify_slope(
            &steep,
            SlopeBand::unit(),
            1000,
            1e-12,
            &mut rng
        ));
        let falling = PiecewiseLinear::new(vec![(0.0, 0.0), (1.0, -0.1)]).unwrap();
        assert!(!verify_slope(
            &falling,
            SlopeBand::unit(),
            0,
            1e-12,
            &mut rng
        ));
    }

    #[test]
    fn pair_sorting_handles_repeated_w() {
        // w has a repeated value at different z; sorting pairs keeps them matched
        let z = dv(&[2.0, -1.0, 0.5]);
        let w = dv(&[0.4, -0.2, 0.4]);
        let p = pwl_through(&z, &w, false).unwrap();
        for i in 0..3 {
            assert_eq!(p.eval(z[i]), w[i]);
        }
        assert_eq!(p.breakpoints().len(), 4);
    }

    #[test]
    fn odd_construction_is_odd() {
        let z = dv(&[0.9, -0.2, 1.1]);
        let w = dv(&[0.3, -0.1, 0.3]);
        let p = pwl_through(&z, &w, true).unwrap();
        for k in 0..200 {
            let t = -3.0 + 0.03 * k as f64;
            assert!((p.eval(-t) + p.eval(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn conflicting_duplicates_are_rejected() {
        let e = pwl_through(&dv(&[1.0, 1.0]), &dv(&[0.2, 0.5]), false);
        assert!(matches!(e, Err(Error::InconsistentWitness(_))));
        let ok = pwl_through(&dv(&[1.0, 1.0 + 1e-12]), &dv(&[0.2, 0.2]), false).unwrap();
        assert_eq!(ok.breakpoints().len(), 2);
    }

    #[test]
    fn consistency_products() {
        // w = z/2 everywhere: all products are (1/2)(1/2)·dz² ≥ 0
        let z = dv(&[1.0, -2.0, 0.5]);
        let w = &z * 0.5;
        assert!(slope_consistency_min(&z, &w, true) >= 0.0);
        // w = 2z violates the slope bound
        assert!(slope_consistency_min(&z, &(&z * 2.0), false) < 0.0);
        // monotone but the odd mirror forces a slope above one
        let z = dv(&[1.0, -0.9]);
        let w = dv(&[0.5, -0.1]);
        assert!(slope_consistency_min(&z, &w, false) >= 0.0);
        assert!(slope_consistency_min(&z, &w, true) < 0.0);
    }
}
