//! Conic feasibility engine.
//!
//! Every LMI in this crate is put in the form
//!
//! ```text
//! find y = (y_1, …, y_r)   with   𝒜 y = b,   y_k ∈ K_k,   [aᵀy = 1],   [minimize cᵀy]
//! ```
//!
//! and solved by Douglas–Rachford splitting between the affine set (projector
//! from a pseudo-inverse of the normal equations, computed once) and the product
//! of cones. The method never proves infeasibility on its own; a problem that
//! does not converge comes back `Undetermined`, and `Infeasible` is only assigned
//! through [`solve_alternative_pair`] when the other side of a theorem of
//! alternatives is feasible.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::ConeSpec;
use crate::error::{invalid, Error, Result};
use crate::matrix::{sym_eig, SymMatrix};

/// A named variable block living in a cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub cone: ConeSpec,
}

/// Sparse linear operator stored as `(row, col, value)` triplets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl LinearMap {
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            out[r] += v * y[c];
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            a[(r, c)] += v;
        }
        a
    }
}

/// Sparse affine functional `Σ coeffs[i].1 · y[coeffs[i].0] = value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub value: f64,
}

impl AffineConstraint {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, v)| v * y[c]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicFeasibilityProblem {
    pub blocks: Vec<VarBlock>,
    pub equality_map: LinearMap,
    pub rhs: Vec<f64>,
    /// Fixes the scale of homogeneous problems.
    pub normalization: Option<AffineConstraint>,
    /// Optional linear objective, minimized over the feasible set.
    pub objective: Option<Vec<(usize, f64)>>,
}

impl ConicFeasibilityProblem {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.cone.vec_len()).sum()
    }

    /// Number of scalar equality rows, normalization included.
    pub fn constraint_count(&self) -> usize {
        self.equality_map.rows + usize::from(self.normalization.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(invalid("problem has no variable blocks"));
        }
        let mut seen = HashSet::new();
        for b in &self.blocks {
            if !seen.insert(b.name.as_str()) {
                return Err(invalid(format!("duplicate block name {:?}", b.name)));
            }
        }
        let n = self.dim();
        if self.equality_map.cols != n {
            return Err(invalid(format!(
                "equality map has {} columns, variables have dimension {n}",
                self.equality_map.cols
            )));
        }
        if self.rhs.len() != self.equality_map.rows {
            return Err(invalid("rhs length does not match equality rows"));
        }
        let in_range = |c: usize| c < n;
        if !self
            .equality_map
            .entries
            .iter()
            .all(|&(r, c, v)| r < self.equality_map.rows && in_range(c) && v.is_finite())
        {
            return Err(invalid("equality map entry out of range or non-finite"));
        }
        if let Some(norm) = &self.normalization {
            if !norm
                .coeffs
                .iter()
                .all(|&(c, v)| in_range(c) && v.is_finite())
            {
                return Err(invalid("normalization coefficient out of range"));
            }
        }
        if let Some(obj) = &self.objective {
            if !obj.iter().all(|&(c, v)| in_range(c) && v.is_finite()) {
                return Err(invalid("objective coefficient out of range"));
            }
        }
        if !self.rhs.iter().all(|v| v.is_finite()) {
            return Err(invalid("rhs has non-finite entries"));
        }
        Ok(())
    }

    /// Column offset of each block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = off;
                off += b.cone.vec_len();
                o
            })
            .collect()
    }

    /// Splits a flat vector into named blocks.
    pub fn split(&self, y: &[f64]) -> BlockPoint {
        let offsets = self.offsets();
        BlockPoint {
            blocks: self
                .blocks
                .iter()
                .zip(offsets)
                .map(|(b, o)| (b.name.clone(), y[o..o + b.cone.vec_len()].to_vec()))
                .collect(),
        }
    }

    /// Inverse of [`split`](Self::split); blocks must be present in order.
    pub fn flatten(&self, point: &BlockPoint) -> Result<Vec<f64>> {
        let mut y = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            let v = point
                .get(&b.name)
                .ok_or_else(|| invalid(format!("point is missing block {:?}", b.name)))?;
            if v.len() != b.cone.vec_len() {
                return Err(invalid(format!("block {:?} has wrong length", b.name)));
            }
            y.extend_from_slice(v);
        }
        Ok(y)
    }
}

/// Values of the variable blocks, keyed by block name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPoint {
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl BlockPoint {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Column range of a block inside the flat variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRef {
    pub offset: usize,
    pub len: usize,
}

/// Incremental construction of a [`ConicFeasibilityProblem`].
///
/// Constraints are given as closures evaluating a *linear* map on the flat
/// variable vector; the builder probes them with unit vectors to recover the
/// sparse operator, so callers write constraints in matrix form.
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    blocks: Vec<VarBlock>,
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    normalization: Option<AffineConstraint>,
    objective: Option<Vec<(usize, f64)>>,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: &str, cone: ConeSpec) -> BlockRef {
        let r = BlockRef {
            offset: self.dim,
            len: cone.vec_len(),
        };
        self.blocks.push(VarBlock {
            name: name.to_string(),
            cone,
        });
        self.dim += r.len;
        r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Appends the rows `map(y) = rhs`.
    pub fn add_rows(&mut self, rhs: &[f64], map: impl Fn(&[f64]) -> Vec<f64>) {
        let row0 = self.rhs.len();
        let mut e = vec![0.0; self.dim];
        for c in 0..self.dim {
            e[c] = 1.0;
            let col = map(&e);
            assert_eq!(col.len(), rhs.len(), "constraint map length must match rhs");
            for (r, v) in col.into_iter().enumerate() {
                if v != 0.0 {
                    self.entries.push((row0 + r, c, v));
                }
            }
            e[c] = 0.0;
        }
        self.rhs.extend_from_slice(rhs);
    }

    pub fn set_normalization(&mut self, value: f64, functional: impl Fn(&[f64]) -> f64) {
        self.normalization = Some(AffineConstraint {
            coeffs: self.probe_scalar(functional),
            value,
        });
    }

    pub fn set_objective(&mut self, functional: impl Fn(&[f64]) -> f64) {
        self.objective = Some(self.probe_scalar(functional));
    }

    fn probe_scalar(&self, functional: impl Fn(&[f64]) -> f64) -> Vec<(usize, f64)> {
        let mut e = vec![0.0; self.dim];
        let mut out = Vec::new();
        for c in 0..self.dim {
            e[c] = 1.0;
            let v = functional(&e);
            if v != 0.0 {
                out.push((c, v));
            }
            e[c] = 0.0;
        }
        out
    }

    pub fn build(self) -> Result<ConicFeasibilityProblem> {
        let p = ConicFeasibilityProblem {
            blocks: self.blocks,
            equality_map: LinearMap {
                rows: self.rhs.len(),
                cols: self.dim,
                entries: self.entries,
            },
            rhs: self.rhs,
            normalization: self.normalization,
            objective: self.objective,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eq_tol: f64,
    pub cone_tol: f64,
    pub max_iter: usize,
    /// Over-relaxation of the Douglas–Rachford update, in (0, 2).
    pub relaxation: f64,
    /// Weight of the objective inside the affine proximal step.
    pub objective_step: f64,
    /// Fixed-point residual below which an optimization problem counts as converged.
    pub stationarity_tol: f64,
    /// Iterations between termination checks.
    pub check_every: usize,
    /// Keep the full fixed-point residual history in the report.
    pub record_residuals: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eq_tol: 1e-8,
            cone_tol: 1e-8,
            max_iter: 200_000,
            relaxation: 1.8,
            objective_step: 0.1,
            stationarity_tol: 1e-9,
            check_every: 10,
            record_residuals: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖𝒜y − b‖∞`, normalization row included.
    pub equality: f64,
    /// Largest Euclidean distance of a block to its cone.
    pub cone_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub point: Option<BlockPoint>,
    pub residuals: Residuals,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub certificate_note: String,
    #[serde(skip)]
    pub fixed_point_residuals: Vec<f64>,
}

/// Recomputes constraint residuals of a flat point straight from the problem
/// data: the sparse map, the normalization row and each cone's projection.
pub fn check_point(problem: &ConicFeasibilityProblem, y: &[f64]) -> Result<Residuals> {
    if y.len() != problem.dim() {
        return Err(invalid("point dimension does not match problem"));
    }
    let mut eq = problem
        .equality_map
        .apply(y)
        .iter()
        .zip(&problem.rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if let Some(norm) = &problem.normalization {
        eq = eq.max((norm.eval(y) - norm.value).abs());
    }
    let mut cone_distance: f64 = 0.0;
    for (b, o) in problem.blocks.iter().zip(problem.offsets()) {
        cone_distance = cone_distance.max(b.cone.distance(&y[o..o + b.cone.vec_len()])?);
    }
    Ok(Residuals {
        equality: eq,
        cone_distance,
    })
}

/// Dense affine projector `y ↦ P y + o` onto `{y : 𝒜y = b}`.
struct AffineProjector {
    proj: DMatrix<f64>,
    offset: DVector<f64>,
    consistent: bool,
}

impl AffineProjector {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        if a.nrows() == 0 {
            return Ok(Self {
                proj: DMatrix::identity(n, n),
                offset: DVector::zeros(n),
                consistent: true,
            });
        }
        let gram = SymMatrix::new(a * a.transpose())?;
        let eig = sym_eig(&gram)?;
        let cutoff = 1e-12 * eig.max().max(f64::MIN_POSITIVE);
        let pinv = eig.reconstruct_with(|l| if l > cutoff { 1.0 / l } else { 0.0 });
        let at_ginv = a.transpose() * pinv.as_matrix();
        let proj = DMatrix::identity(n, n) - &at_ginv * a;
        let offset = &at_ginv * b;
        let miss = (a * &offset - b).amax();
        let consistent = miss <= 1e-9 * (1.0 + b.amax());
        Ok(Self {
            proj,
            offset,
            consistent,
        })
    }

    fn apply_into(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(&self.offset);
        out.gemv(1.0, &self.proj, v, 1.0);
    }
}

fn project_cones(
    problem: &ConicFeasibilityProblem,
    offsets: &[usize],
    y: &mut [f64],
) -> Result<()> {
    for (b, &o) in problem.blocks.iter().zip(offsets) {
        b.cone.project_in_place(&mut y[o..o + b.cone.vec_len()])?;
    }
    Ok(())
}

/// Runs Douglas–Rachford splitting on one problem.
pub fn solve(problem: &ConicFeasibilityProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_cancellable(problem, cfg, &AtomicBool::new(false))
}

/// [`solve`] that also stops, `Undetermined`, once `cancel` is set. The flag is
/// polled at every termination check.
pub fn solve_cancellable(
    problem: &ConicFeasibilityProblem,
    cfg: &SolverConfig,
    cancel: &AtomicBool,
) -> Result<SolveReport> {
    problem.validate()?;
    if !(cfg.relaxation > 0.0 && cfg.relaxation < 2.0) {
        return Err(invalid("relaxation must lie in (0, 2)"));
    }
    let n = problem.dim();
    let offsets = problem.offsets();

    let mut a = problem.equality_map.to_dense();
    let mut b = problem.rhs.clone();
    if let Some(norm) = &problem.normalization {
        let r = a.nrows();
        a = a.insert_row(r, 0.0);
        for &(c, v) in &norm.coeffs {
            a[(r, c)] += v;
        }
        b.push(norm.value);
    }
    let affine = AffineProjector::new(&a, &DVector::from_vec(b))?;
    if !affine.consistent {
        return Ok(SolveReport {
            status: SolveStatus::Undetermined,
            point: None,
            residuals: Residuals {
                equality: f64::INFINITY,
                cone_distance: f64::INFINITY,
            },
            iterations: 0,
            objective: None,
            certificate_note: "equality constraints are inconsistent".into(),
            fixed_point_residuals: Vec::new(),
        });
    }

    let mut step = DVector::zeros(n);
    if let Some(obj) = &problem.objective {
        for &(c, v) in obj {
            step[c] += cfg.objective_step * v;
        }
    }
    let has_objective = problem.objective.is_some();

    let mut z = DVector::<f64>::zeros(n);
    let mut x = DVector::<f64>::zeros(n);
    let mut y = DVector::<f64>::zeros(n);
    let mut reflected = DVector::<f64>::zeros(n);
    let mut history = Vec::new();
    let mut fp_res = f64::INFINITY;
    let alpha = cfg.relaxation;
    let check_every = cfg.check_every.max(1);

    for it in 1..=cfg.max_iter {
        x.copy_from(&z);
        project_cones(problem, &offsets, x.as_mut_slice())?;
        reflected.copy_from(&x);
        reflected *= 2.0;
        reflected -= &z;
        reflected -= &step;
        affine.apply_into(&reflected, &mut y);
        let diff = &y - &x;
        fp_res = diff.norm();
        z.axpy(alpha, &diff, 1.0);
        if cfg.record_residuals {
            history.push(fp_res);
        }

        if it % check_every == 0 || it == cfg.max_iter {
            let res = check_point(problem, x.as_slice())?;
            let feasible = res.equality <= cfg.eq_tol && res.cone_distance <= cfg.cone_tol;
            let converged = !has_objective || fp_res <= cfg.stationarity_tol;
            if feasible && converged {
                debug!(
                    "solve: converged after {it} iterations (fixed-point residual {fp_res:.2e})"
                );
                return Ok(finish(
                    problem,
                    x.as_slice(),
                    SolveStatus::Feasible,
                    it,
                    res,
                    history,
                    format!("feasible point found; fixed-point residual {fp_res:.2e}"),
                ));
            }
            if cancel.load(Ordering::Relaxed) {
                return Ok(finish(
                    problem,
                    x.as_slice(),
                    SolveStatus::Undetermined,
                    it,
                    res,
                    history,
                    format!(
                        "stopped after {it} iterations (equality residual {:.2e})",
                        res.equality
                    ),
                ));
            }
        }
    }

    let res = check_point(problem, x.as_slice())?;
    debug!(
        "solve: iteration limit, eq residual {:.2e}, fixed-point residual {fp_res:.2e}",
        res.equality
    );
    Ok(finish(
        problem,
        x.as_slice(),
        SolveStatus::Undetermined,
        cfg.max_iter,
        res,
        history,
        format!(
            "iteration limit reached without a feasible point (equality residual {:.2e}, fixed-point residual {fp_res:.2e})",
            res.equality
        ),
    ))
}

fn finish(
    problem: &ConicFeasibilityProblem,
    x: &[f64],
    status: SolveStatus,
    iterations: usize,
    residuals: Residuals,
    history: Vec<f64>,
    note: String,
) -> SolveReport {
    let objective = problem
        .objective
        .as_ref()
        .map(|obj| obj.iter().map(|&(c, v)| v * x[c]).sum());
    SolveReport {
        status,
        point: (status == SolveStatus::Feasible).then(|| problem.split(x)),
        residuals,
        iterations,
        objective,
        certificate_note: note,
        fixed_point_residuals: history,
    }
}

/// Solves a primal/dual pair produced from a theorem of alternatives.
///
/// Both sides run concurrently and the first feasible side cancels the other.
/// A side is promoted to `Infeasible` only when the other side is `Feasible`;
/// two feasible reports mean the tolerances cannot separate the alternatives.
/// Run [`solve`] on each side to test both to completion.
pub fn solve_alternative_pair(
    primal: &ConicFeasibilityProblem,
    dual: &ConicFeasibilityProblem,
    cfg: &SolverConfig,
) -> Result<(SolveReport, SolveReport)> {
    for (label, p) in [("primal", primal), ("dual", dual)] {
        p.validate()?;
        if p.constraint_count() == 0 {
            return Err(invalid(format!("{label} problem has no constraints")));
        }
    }
    // whichever side finds a feasible point first stops the other
    let stop = AtomicBool::new(false);
    let run = |p: &ConicFeasibilityProblem| {
        let r = solve_cancellable(p, cfg, &stop);
        if matches!(&r, Ok(rep) if rep.status == SolveStatus::Feasible) {
            stop.store(true, Ordering::Relaxed);
        }
        r
    };
    let (pr, dr) = std::thread::scope(|s| {
        let hp = s.spawn(|| run(primal));
        let hd = s.spawn(|| run(dual));
        (
            hp.join().expect("primal solve panicked"),
            hd.join().expect("dual solve panicked"),
        )
    });
    let (mut pr, mut dr) = (pr?, dr?);
    match (pr.status, dr.status) {
        (SolveStatus::Feasible, SolveStatus::Feasible) => Err(Error::ToleranceConflict(format!(
            "primal equality residual {:.2e}, dual equality residual {:.2e}",
            pr.residuals.equality, dr.residuals.equality
        ))),
        (SolveStatus::Feasible, _) => {
            dr.status = SolveStatus::Infeasible;
            dr.certificate_note = format!(
                "infeasible: the alternative (primal) is feasible; {}",
                dr.certificate_note
            );
            Ok((pr, dr))
        }
        (_, SolveStatus::Feasible) => {
            pr.status = SolveStatus::Infeasible;
            pr.certificate_note = format!(
                "infeasible: the alternative (dual) is feasible; {}",
                pr.certificate_note
            );
            Ok((pr, dr))
        }
        _ => Ok((pr, dr)),
    }
}
