//! Construction of the stability LMI (primal) and its Lagrangian dual for
//! static OZF multipliers, in both the doubly hyperdominant (DHD) and the
//! doubly dominant (DD, odd nonlinearities) flavours.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::{self, ConeSpec};
use crate::error::{invalid, Error, Result};
use crate::matrix::{he, smat, svec, svec_len, sym_eig, SymMatrix};
use crate::sdp::{BlockPoint, BlockRef, ConicFeasibilityProblem, ProblemBuilder};
pub use crate::system::StateSpace;

/// Slope interval `[mu, nu]` with `mu ≤ 0 ≤ nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBand {
    pub mu: f64,
    pub nu: f64,
}

impl SlopeBand {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !(mu.is_finite() && nu.is_finite() && mu <= 0.0 && 0.0 <= nu) {
            return Err(invalid(format!(
                "slope band needs mu <= 0 <= nu, got [{mu}, {nu}]"
            )));
        }
        Ok(Self { mu, nu })
    }

    /// `[0, 1]`.
    pub fn unit() -> Self {
        Self { mu: 0.0, nu: 1.0 }
    }

    pub fn is_unit(&self) -> bool {
        self.mu == 0.0 && self.nu == 1.0
    }
}

impl Default for SlopeBand {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierClass {
    /// Doubly hyperdominant `M`; valid for every slope-restricted `φ`.
    Dhd,
    /// Doubly dominant `M`; valid only for odd `φ`.
    Dd,
}

impl MultiplierClass {
    pub fn requires_odd(&self) -> bool {
        matches!(self, MultiplierClass::Dd)
    }
}

impl fmt::Display for MultiplierClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultiplierClass::Dhd => "dhd",
            MultiplierClass::Dd => "dd",
        })
    }
}

impl FromStr for MultiplierClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dhd" => Ok(MultiplierClass::Dhd),
            "dd" => Ok(MultiplierClass::Dd),
            other => Err(invalid(format!(
                "unknown multiplier class {other:?} (expected dhd or dd)"
            ))),
        }
    }
}

/// `𝓜(M, μ, ν) = Tᵀ [0 M; Mᵀ 0] T` with `T = [νI −I; −μI I]`.
pub fn ozf_multiplier(m: &DMatrix<f64>, band: SlopeBand) -> Result<SymMatrix> {
    let k = m.nrows();
    if m.ncols() != k || k == 0 {
        return Err(invalid("multiplier matrix must be square and non-empty"));
    }
    let eye = DMatrix::<f64>::identity(k, k);
    let mut n = DMatrix::zeros(2 * k, 2 * k);
    n.view_mut((0, k), (k, k)).copy_from(m);
    n.view_mut((k, 0), (k, k)).copy_from(&m.transpose());
    let mut t = DMatrix::zeros(2 * k, 2 * k);
    t.view_mut((0, 0), (k, k)).copy_from(&(&eye * band.nu));
    t.view_mut((0, k), (k, k)).copy_from(&(-&eye));
    t.view_mut((k, 0), (k, k)).copy_from(&(&eye * -band.mu));
    t.view_mut((k, k), (k, k)).copy_from(&eye);
    SymMatrix::new(t.transpose() * n * t)
}

/// `[AᵀP + PA, PB; BᵀP, 0] + [C D; 0 I]ᵀ Π [C D; 0 I]`.
pub fn iqc_lhs(sys: &StateSpace, p: &SymMatrix, pi: &SymMatrix) -> Result<SymMatrix> {
    let (n, m) = (sys.n(), sys.m());
    if p.dim() != n || pi.dim() != 2 * m {
        return Err(invalid(format!(
            "iqc_lhs: expected P {n}x{n} and Pi {0}x{0}, got {1} and {2}",
            2 * m,
            p.dim(),
            pi.dim()
        )));
    }
    let pm = p.as_matrix();
    let mut lyap = DMatrix::zeros(n + m, n + m);
    lyap.view_mut((0, 0), (n, n)).copy_from(&he(&(pm * &sys.a)));
    let pb = pm * &sys.b;
    lyap.view_mut((0, n), (n, m)).copy_from(&pb);
    lyap.view_mut((n, 0), (m, n)).copy_from(&pb.transpose());

    let mut out_map = DMatrix::zeros(2 * m, n + m);
    out_map.view_mut((0, 0), (m, n)).copy_from(&sys.c);
    out_map.view_mut((0, n), (m, m)).copy_from(&sys.d);
    out_map
        .view_mut((m, n), (m, m))
        .copy_from(&DMatrix::identity(m, m));
    SymMatrix::new(lyap + out_map.transpose() * pi.as_matrix() * out_map)
}

/// `Y(H) = H₁₂ᵀCᵀ + H₂₂(Dᵀ − I)`, the term pairing with `M` in the Lagrangian
/// for the band `[0, 1]`.
pub fn dual_coupling(sys: &StateSpace, h: &SymMatrix) -> DMatrix<f64> {
    let (n, m) = (sys.n(), sys.m());
    let h12 = h.block(0, n, n, m);
    let h22 = h.block(n, n, m, m);
    h12.transpose() * sys.c.transpose() + h22 * (sys.d.transpose() - DMatrix::identity(m, m))
}

/// `He{A H₁₁ + B H₁₂ᵀ}`.
pub fn dual_lyapunov(sys: &StateSpace, h: &SymMatrix) -> DMatrix<f64> {
    let (n, m) = (sys.n(), sys.m());
    let h11 = h.block(0, 0, n, n);
    let h12 = h.block(0, n, n, m);
    he(&(&sys.a * h11 + &sys.b * h12.transpose()))
}

/// `ε = 1e-6·(1 + ‖A‖_F + ‖C‖²_F)` for the strict primal `LHS ⪯ −εI`.
pub fn default_eps(sys: &StateSpace) -> f64 {
    1e-6 * (1.0 + sys.a.norm() + sys.c.norm_squared())
}

fn ones_outer(f: &DVector<f64>, g: &DVector<f64>) -> DMatrix<f64> {
    let m = f.len();
    DMatrix::from_fn(m, m, |i, j| f[j] + g[i])
}

fn hollow(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    y.fill_diagonal(0.0);
    y
}

fn upper_entries(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    (0..n)
        .flat_map(|i| (i..n).map(move |j| x[(i, j)]))
        .collect()
}

fn offdiag_entries(x: &DMatrix<f64>) -> Vec<f64> {
    let m = x.nrows();
    (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| x[(i, j)]))
        .collect()
}

fn slice<'a>(y: &'a [f64], r: &BlockRef) -> &'a [f64] {
    &y[r.offset..r.offset + r.len]
}

// ---------------------------------------------------------------------------
// primal

/// Column layout of a primal problem.
#[derive(Debug, Clone)]
pub struct PrimalLayout {
    pub n: usize,
    pub m: usize,
    pub class: MultiplierClass,
    pub band: SlopeBand,
    pub eps: f64,
    p: BlockRef,
    p_pos: Option<BlockRef>,
    mult: Vec<BlockRef>,
    slack: BlockRef,
}

/// Multiplier and Lyapunov variables of a primal point.
#[derive(Debug, Clone)]
pub struct PrimalVars {
    pub p: DMatrix<f64>,
    /// The multiplier matrix actually used in the LMI (`M_d + M_od` for DD).
    pub m: DMatrix<f64>,
    pub m_d: Option<DMatrix<f64>>,
    pub m_od: Option<DMatrix<f64>>,
    pub m_od_bar: Option<DMatrix<f64>>,
}

impl PrimalLayout {
    fn decode_flat(&self, y: &[f64]) -> PrimalVars {
        let m = self.m;
        let p = smat(slice(y, &self.p))
            .expect("layout sized by svec")
            .into_matrix();
        match self.class {
            MultiplierClass::Dhd => {
                let diag = slice(y, &self.mult[0]);
                let off = cones::unflatten_rows(slice(y, &self.mult[1]), m);
                let mut mm = hollow(&off);
                for i in 0..m {
                    mm[(i, i)] = diag[i];
                }
                PrimalVars {
                    p,
                    m: mm,
                    m_d: None,
                    m_od: None,
                    m_od_bar: None,
                }
            }
            MultiplierClass::Dd => {
                let m_d =
                    DMatrix::from_diagonal(&DVector::from_column_slice(slice(y, &self.mult[0])));
                let m_od = cones::unflatten_rows(slice(y, &self.mult[1]), m);
                let m_od_bar = cones::unflatten_rows(slice(y, &self.mult[2]), m);
                PrimalVars {
                    p,
                    m: &m_d + &m_od,
                    m_d: Some(m_d),
                    m_od: Some(m_od),
                    m_od_bar: Some(m_od_bar),
                }
            }
        }
    }

    /// Reads the structured variables out of a solver point.
    pub fn decode(
        &self,
        problem: &ConicFeasibilityProblem,
        point: &BlockPoint,
    ) -> Result<PrimalVars> {
        Ok(self.decode_flat(&problem.flatten(point)?))
    }
}

/// Builds the primal LMI: find `P`, `M` in the multiplier class with
/// `iqc_lhs(P, 𝓜(M, μ, ν)) ⪯ −εI`, encoded with a PSD slack `S` as
/// `LHS + εI + S = 0`.
///
/// For the band `[0, 1]` the `P ≻ 0` requirement is implied by the `(1,1)`
/// block together with Hurwitz `A` and is dropped; otherwise `P ⪰ εI` is added.
pub fn build_primal(
    sys: &StateSpace,
    band: SlopeBand,
    class: MultiplierClass,
    eps: Option<f64>,
) -> Result<(ConicFeasibilityProblem, PrimalLayout)> {
    let (n, m) = (sys.n(), sys.m());
    let eps = eps.unwrap_or_else(|| default_eps(sys));
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("eps must be positive"));
    }
    let mut b = ProblemBuilder::new();
    let p = b.add_block("P", ConeSpec::Free(svec_len(n)));
    let p_pos = (!band.is_unit()).then(|| b.add_block("P_margin", ConeSpec::Psd(n)));

    let mult = match class {
        MultiplierClass::Dhd => vec![
            b.add_block("M_diag", ConeSpec::Free(m)),
            b.add_block("M_off", ConeSpec::ZeroDiagZ(m)),
            b.add_block("row_sums", ConeSpec::NonnegOrthant(m)),
            b.add_block("col_sums", ConeSpec::NonnegOrthant(m)),
        ],
        MultiplierClass::Dd => vec![
            b.add_block("M_d", ConeSpec::Free(m)),
            b.add_block("M_od", ConeSpec::Free(m * m)),
            b.add_block("M_od_bar", ConeSpec::Free(m * m)),
            b.add_block("dom_rows", ConeSpec::NonnegOrthant(m)),
            b.add_block("dom_cols", ConeSpec::NonnegOrthant(m)),
            b.add_block("bar_minus", ConeSpec::NonnegOrthant(m * m)),
            b.add_block("bar_plus", ConeSpec::NonnegOrthant(m * m)),
        ],
    };
    let slack = b.add_block("S", ConeSpec::Psd(n + m));
    let layout = PrimalLayout {
        n,
        m,
        class,
        band,
        eps,
        p,
        p_pos,
        mult,
        slack,
    };

    if let Some(pp) = layout.p_pos {
        let rhs = svec(&SymMatrix::identity(n))
            .iter()
            .map(|v| v * eps)
            .collect::<Vec<_>>();
        b.add_rows(&rhs, |y| {
            slice(y, &layout.p)
                .iter()
                .zip(slice(y, &pp))
                .map(|(a, q)| a - q)
                .collect()
        });
    }

    let ones = DVector::from_element(m, 1.0);
    match class {
        MultiplierClass::Dhd => {
            b.add_rows(&vec![0.0; 2 * m], |y| {
                let v = layout.decode_flat(y);
                let rows = &v.m * &ones - DVector::from_column_slice(slice(y, &layout.mult[2]));
                let cols =
                    v.m.transpose() * &ones - DVector::from_column_slice(slice(y, &layout.mult[3]));
                rows.iter().chain(cols.iter()).copied().collect()
            });
        }
        MultiplierClass::Dd => {
            b.add_rows(&vec![0.0; 2 * m], |y| {
                let v = layout.decode_flat(y);
                let (od, bar) = (v.m_od.unwrap(), v.m_od_bar.unwrap());
                (0..m)
                    .map(|i| od[(i, i)])
                    .chain((0..m).map(|i| bar[(i, i)]))
                    .collect()
            });
            b.add_rows(&vec![0.0; 2 * m + 2 * m * m], |y| {
                let v = layout.decode_flat(y);
                let (md, od, bar) = (v.m_d.unwrap(), v.m_od.unwrap(), v.m_od_bar.unwrap());
                let dom = &md - &bar;
                let rows = &dom * &ones - DVector::from_column_slice(slice(y, &layout.mult[3]));
                let cols =
                    dom.transpose() * &ones - DVector::from_column_slice(slice(y, &layout.mult[4]));
                let minus = &bar - &od - cones::unflatten_rows(slice(y, &layout.mult[5]), m);
                let plus = &bar + &od - cones::unflatten_rows(slice(y, &layout.mult[6]), m);
                rows.iter()
                    .chain(cols.iter())
                    .copied()
                    .chain(cones::flatten_rows(&minus))
                    .chain(cones::flatten_rows(&plus))
                    .collect()
            });
        }
    }

    let rhs: Vec<f64> = svec(&SymMatrix::identity(n + m))
        .iter()
        .map(|v| -v * eps)
        .collect();
    b.add_rows(&rhs, |y| {
        let v = layout.decode_flat(y);
        let pi = ozf_multiplier(&v.m, band).expect("square multiplier");
        let lhs =
            iqc_lhs(sys, &SymMatrix::new(v.p).expect("square"), &pi).expect("consistent dims");
        let s = smat(slice(y, &layout.slack)).expect("svec sized");
        svec(&SymMatrix::new(lhs.into_matrix() + s.as_matrix()).expect("square"))
    });

    Ok((b.build()?, layout))
}

/// Outcome of re-evaluating a primal candidate from its matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalCheck {
    /// Largest eigenvalue of `iqc_lhs(P, 𝓜(M, μ, ν))`.
    pub lmi_max_eig: f64,
    /// Smallest eigenvalue of `P`.
    pub p_min_eig: f64,
    pub multiplier_in_class: bool,
    pub eps: f64,
}

impl PrimalCheck {
    /// Strict LMI holds, `P ≻ 0`, and `M` lies in its class.
    pub fn certifies(&self) -> bool {
        self.lmi_max_eig < 0.0 && self.p_min_eig > 0.0 && self.multiplier_in_class
    }
}

/// Independent re-check of a primal point: rebuilds the multiplier and LMI
/// from `P` and `M` and tests membership with `cones` predicates.
pub fn check_primal(
    sys: &StateSpace,
    band: SlopeBand,
    class: MultiplierClass,
    vars: &PrimalVars,
    eps: f64,
    tol: f64,
) -> Result<PrimalCheck> {
    let p = SymMatrix::new(vars.p.clone())?;
    let pi = ozf_multiplier(&vars.m, band)?;
    let lmi_max_eig = sym_eig(&iqc_lhs(sys, &p, &pi)?)?.max();
    let p_min_eig = sym_eig(&p)?.min();
    let multiplier_in_class = match class {
        MultiplierClass::Dhd => cones::is_doubly_hyperdominant(&vars.m, tol),
        MultiplierClass::Dd => {
            let dd = cones::is_doubly_dominant(&vars.m, tol);
            match (&vars.m_d, &vars.m_od, &vars.m_od_bar) {
                (Some(md), Some(od), Some(bar)) => {
                    let split = cones::decompose_dd_vars(md, &hollow(od), &hollow(bar), tol)?;
                    dd && split
                }
                _ => dd,
            }
        }
    };
    Ok(PrimalCheck {
        lmi_max_eig,
        p_min_eig,
        multiplier_in_class,
        eps,
    })
}

// ---------------------------------------------------------------------------
// dual

/// Scaling and rank bias of the dual problem.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualOptions {
    /// Normalization `trace(H₁₁) = h11_trace`. Every nonzero dual solution has
    /// `H₁₁ ≠ 0` when the loop is well-posed, so this slice meets every ray of
    /// interest; the value only sets the scale of the extracted witness.
    pub h11_trace: f64,
    /// Minimize `trace(H₂₂)` over the normalized dual set. This trace
    /// heuristic drives the solver to rank-one extreme points.
    pub minimize_h22_trace: bool,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            h11_trace: 3.0,
            minimize_h22_trace: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualLayout {
    pub n: usize,
    pub m: usize,
    pub class: MultiplierClass,
    h: BlockRef,
    f: BlockRef,
    g: BlockRef,
    x: BlockRef,
    z: Option<BlockRef>,
}

/// Dual variables `(H, f, g, X[, Z])`.
#[derive(Debug, Clone)]
pub struct DualVars {
    pub h: SymMatrix,
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: Option<DMatrix<f64>>,
}

impl DualLayout {
    fn decode_flat(&self, y: &[f64]) -> DualVars {
        DualVars {
            h: smat(slice(y, &self.h)).expect("svec sized"),
            f: DVector::from_column_slice(slice(y, &self.f)),
            g: DVector::from_column_slice(slice(y, &self.g)),
            x: cones::unflatten_rows(slice(y, &self.x), self.m),
            z: self.z.map(|z| cones::unflatten_rows(slice(y, &z), self.m)),
        }
    }

    pub fn decode(
        &self,
        problem: &ConicFeasibilityProblem,
        point: &BlockPoint,
    ) -> Result<DualVars> {
        Ok(self.decode_flat(&problem.flatten(point)?))
    }
}

/// Builds the dual LMI for the band `[0, 1]`:
///
/// * DHD: `He{AH₁₁ + BH₁₂ᵀ} = 0`, `Y(H) = 1fᵀ + g1ᵀ + X`;
/// * DD: `He{…} = 0`, `P_d(Y) = P_d(1fᵀ + g1ᵀ)`, `P_od(Y) = P_od(X − Z)`,
///   `P_od(X + Z) = −P_od(1fᵀ + g1ᵀ)`;
///
/// with `H ⪰ 0`, `f, g ≥ 0`, `X, Z` hollow Z-matrices.
pub fn build_dual(
    sys: &StateSpace,
    band: SlopeBand,
    class: MultiplierClass,
    opts: DualOptions,
) -> Result<(ConicFeasibilityProblem, DualLayout)> {
    if !band.is_unit() {
        return Err(Error::UnsupportedBand {
            mu: band.mu,
            nu: band.nu,
        });
    }
    if !(opts.h11_trace > 0.0 && opts.h11_trace.is_finite()) {
        return Err(invalid("h11_trace must be positive"));
    }
    let (n, m) = (sys.n(), sys.m());
    let mut b = ProblemBuilder::new();
    let layout = DualLayout {
        n,
        m,
        class,
        h: b.add_block("H", ConeSpec::Psd(n + m)),
        f: b.add_block("f", ConeSpec::NonnegOrthant(m)),
        g: b.add_block("g", ConeSpec::NonnegOrthant(m)),
        x: b.add_block("X", ConeSpec::ZeroDiagZ(m)),
        z: (class == MultiplierClass::Dd).then(|| b.add_block("Z", ConeSpec::ZeroDiagZ(m))),
    };

    b.add_rows(&vec![0.0; svec_len(n)], |y| {
        upper_entries(&dual_lyapunov(sys, &layout.decode_flat(y).h))
    });

    match class {
        MultiplierClass::Dhd => {
            b.add_rows(&vec![0.0; m * m], |y| {
                let v = layout.decode_flat(y);
                let r = dual_coupling(sys, &v.h) - ones_outer(&v.f, &v.g) - &v.x;
                cones::flatten_rows(&r)
            });
        }
        MultiplierClass::Dd => {
            let off = m * (m - 1);
            b.add_rows(&vec![0.0; m + 2 * off], |y| {
                let v = layout.decode_flat(y);
                let yy = dual_coupling(sys, &v.h);
                let f1 = ones_outer(&v.f, &v.g);
                let z = v.z.expect("dd layout has Z");
                let diag = (0..m).map(|i| yy[(i, i)] - f1[(i, i)]);
                let coupling = offdiag_entries(&(&yy - &v.x + &z));
                let split = offdiag_entries(&(&v.x + &z + &f1));
                diag.chain(coupling).chain(split).collect()
            });
        }
    }

    b.set_normalization(opts.h11_trace, |y| {
        let h = layout.decode_flat(y).h;
        (0..n).map(|i| h.get(i, i)).sum()
    });
    if opts.minimize_h22_trace {
        b.set_objective(|y| {
            let h = layout.decode_flat(y).h;
            (n..n + m).map(|i| h.get(i, i)).sum()
        });
    }

    Ok((b.build()?, layout))
}

/// Constraint violations of a dual candidate, computed from its matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualCheck {
    /// `‖He{AH₁₁ + BH₁₂ᵀ}‖∞`.
    pub lyapunov_residual: f64,
    /// Largest violation of the coupling equalities.
    pub coupling_residual: f64,
    /// Smallest eigenvalue of `H`.
    pub h_min_eig: f64,
    /// Largest violation of `f, g ≥ 0` and of the hollow Z-structure of `X`, `Z`.
    pub sign_violation: f64,
    pub h_trace: f64,
}

impl DualCheck {
    pub fn passes(&self, eq_tol: f64, cone_tol: f64) -> bool {
        self.lyapunov_residual <= eq_tol
            && self.coupling_residual <= eq_tol
            && self.h_min_eig >= -cone_tol
            && self.sign_violation <= cone_tol
            && self.h_trace > 0.0
    }
}

fn z_violation(x: &DMatrix<f64>) -> f64 {
    let m = x.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let v = if i == j {
                x[(i, j)].abs()
            } else {
                x[(i, j)].max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Independent re-check of a dual point.
pub fn check_dual(sys: &StateSpace, class: MultiplierClass, vars: &DualVars) -> Result<DualCheck> {
    let m = sys.m();
    if vars.h.dim() != sys.n() + m
        || vars.f.len() != m
        || vars.g.len() != m
        || vars.x.shape() != (m, m)
    {
        return Err(invalid("dual variables have wrong dimensions"));
    }
    let lyapunov_residual = dual_lyapunov(sys, &vars.h).amax();
    let y = dual_coupling(sys, &vars.h);
    let f1 = ones_outer(&vars.f, &vars.g);
    let coupling_residual = match class {
        MultiplierClass::Dhd => (&y - &f1 - &vars.x).amax(),
        MultiplierClass::Dd => {
            let z = vars
                .z
                .as_ref()
                .ok_or_else(|| invalid("DD dual point needs Z"))?;
            let diag = (0..m)
                .map(|i| (y[(i, i)] - f1[(i, i)]).abs())
                .fold(0.0, f64::max);
            let c1 = hollow(&(&y - &vars.x + z)).amax();
            let c2 = hollow(&(&vars.x + z + &f1)).amax();
            diag.max(c1).max(c2)
        }
    };
    let mut sign_violation = vars
        .f
        .iter()
        .chain(vars.g.iter())
        .map(|v| (-v).max(0.0))
        .fold(0.0, f64::max)
        .max(z_violation(&vars.x));
    if let Some(z) = &vars.z {
        sign_violation = sign_violation.max(z_violation(z));
    }
    Ok(DualCheck {
        lyapunov_residual,
        coupling_residual,
        h_min_eig: sym_eig(&vars.h)?.min(),
        sign_violation,
        h_trace: vars.h.trace(),
    })
}
