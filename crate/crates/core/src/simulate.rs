//! Closed-loop simulation of `ẋ = Ax + BΦ(z)`, `z = Cx + DΦ(z)` with
//! `Φ = diag(φ, …, φ)` for a piecewise-linear `φ`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::system::{LoopWellPosedness, StateSpace};
use crate::witness::PiecewiseLinear;

/// Iteration cap for the algebraic output loop.
pub const MAX_OUTPUT_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    /// `‖z − Cx − DΦ(z)‖∞` accepted by the output solve.
    pub output_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            output_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }

    /// `max_k ‖x_k − x_ref‖∞`.
    pub fn max_deviation_from(&self, x_ref: &DVector<f64>) -> f64 {
        self.states
            .iter()
            .map(|x| (x - x_ref).amax())
            .fold(0.0, f64::max)
    }

    /// State at the first sample with `t ≥ time`.
    pub fn state_at(&self, time: f64) -> Option<&DVector<f64>> {
        let k = self.times.partition_point(|&t| t < time - 1e-9);
        self.states.get(k)
    }

    /// CSV with header `t,x1..xn,z1..zm,w1..wm`. Values use the shortest
    /// representation that parses back to the identical double.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let (n, m) = match (self.states.first(), self.outputs.first()) {
            (Some(x), Some(z)) => (x.len(), z.len()),
            _ => (0, 0),
        };
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("z{i}")));
        header.extend((1..=m).map(|i| format!("w{i}")));
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let row: Vec<String> = std::iter::once(self.times[k])
                .chain(self.states[k].iter().copied())
                .chain(self.outputs[k].iter().copied())
                .chain(self.inputs[k].iter().copied())
                .map(|v| v.to_string())
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn apply_phi(pwl: &PiecewiseLinear, z: &DVector<f64>) -> DVector<f64> {
    z.map(|v| pwl.eval(v))
}

/// Solves `z = Cx + DΦ(z)` and returns `(z, Φ(z))`.
///
/// A contractive `D` uses plain fixed-point iteration; otherwise the loop is
/// piecewise linear and coherently oriented, and a damped Newton iteration on
/// `z − Cx − DΦ(z)` is used.
pub fn solve_output(
    sys: &StateSpace,
    pwl: &PiecewiseLinear,
    x: &DVector<f64>,
    warm: Option<&DVector<f64>>,
    output_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != sys.n() {
        return Err(invalid(format!(
            "state has length {}, expected {}",
            x.len(),
            sys.n()
        )));
    }
    let cx = &sys.c * x;
    let mut z = warm.cloned().unwrap_or_else(|| cx.clone());
    if z.len() != sys.m() {
        return Err(invalid("warm start has the wrong length"));
    }
    match sys.loop_well_posedness() {
        LoopWellPosedness::Contractive => {
            for _ in 0..MAX_OUTPUT_ITER {
                let w = apply_phi(pwl, &z);
                let next = &cx + &sys.d * &w;
                let res = (&next - &z).amax();
                if res <= output_tol {
                    return Ok((z, w));
                }
                z = next;
            }
        }
        LoopWellPosedness::CoherentlyOriented => {
            let m = sys.m();
            let eye = DMatrix::<f64>::identity(m, m);
            let residual = |z: &DVector<f64>| {
                let w = apply_phi(pwl, z);
                let r = z - &cx - &sys.d * &w;
                (r, w)
            };
            let (mut r, mut w) = residual(&z);
            for _ in 0..MAX_OUTPUT_ITER {
                if r.amax() <= output_tol {
                    return Ok((z, w));
                }
                let slopes = DMatrix::from_diagonal(&z.map(|v| pwl.slope_at(v)));
                let jac = &eye - &sys.d * slopes;
                let step = jac
                    .lu()
                    .solve(&r)
                    .ok_or_else(|| Error::WellPosedness("singular output Jacobian".into()))?;
                let norm0 = r.amax();
                let mut t = 1.0;
                loop {
                    let cand = &z - &step * t;
                    let (rc, wc) = residual(&cand);
                    if rc.amax() < norm0 || t < 1e-12 {
                        z = cand;
                        r = rc;
                        w = wc;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
    }
    Err(Error::WellPosedness(format!(
        "output loop did not converge to {output_tol:.1e} within {MAX_OUTPUT_ITER} iterations"
    )))
}

fn vector_field(
    sys: &StateSpace,
    pwl: &PiecewiseLinear,
    x: &DVector<f64>,
    warm: &mut DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let (z, w) = solve_output(sys, pwl, x, Some(warm), tol)?;
    *warm = z;
    Ok(&sys.a * x + &sys.b * w)
}

/// Classical fixed-step RK4, solving the output loop at every stage and
/// recording every step.
pub fn integrate(
    sys: &StateSpace,
    pwl: &PiecewiseLinear,
    x0: &DVector<f64>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(invalid("t_end must be nonnegative"));
    }
    if x0.len() != sys.n() {
        return Err(invalid(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            sys.n()
        )));
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let h = opts.dt;
    let tol = opts.output_tol;
    let mut traj = Trajectory::default();
    let mut x = x0.clone();
    let (mut z, mut w) = solve_output(sys, pwl, &x, None, tol)?;
    let mut warm = z.clone();

    for k in 0..=steps {
        traj.times.push(k as f64 * h);
        traj.states.push(x.clone());
        traj.outputs.push(z.clone());
        traj.inputs.push(w.clone());
        if k == steps {
            break;
        }
        let k1 = vector_field(sys, pwl, &x, &mut warm, tol)?;
        let k2 = vector_field(sys, pwl, &(&x + &k1 * (h / 2.0)), &mut warm, tol)?;
        let k3 = vector_field(sys, pwl, &(&x + &k2 * (h / 2.0)), &mut warm, tol)?;
        let k4 = vector_field(sys, pwl, &(&x + &k3 * h), &mut warm, tol)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        (z, w) = solve_output(sys, pwl, &x, Some(&z), tol)?;
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// `‖Ax + BΦ(z(x))‖∞`.
    pub residual: f64,
    pub is_equilibrium: bool,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn verify_equilibrium(
    sys: &StateSpace,
    pwl: &PiecewiseLinear,
    x_eq: &DVector<f64>,
    tol: f64,
) -> Result<EquilibriumReport> {
    let (z, w) = solve_output(sys, pwl, x_eq, None, SimOptions::default().output_tol)?;
    let residual = (&sys.a * x_eq + &sys.b * &w).amax();
    Ok(EquilibriumReport {
        residual,
        is_equilibrium: residual <= tol,
        z: z.as_slice().to_vec(),
        w: w.as_slice().to_vec(),
    })
}

/// One node of a planar vector field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: [f64; 2],
    pub dx: [f64; 2],
}

/// Evaluates `ẋ` on a `resolution × resolution` grid over
/// `x1_range × x2_range`. Only planar systems are supported.
pub fn vector_field_grid(
    sys: &StateSpace,
    pwl: &PiecewiseLinear,
    x1_range: (f64, f64),
    x2_range: (f64, f64),
    resolution: usize,
) -> Result<Vec<FieldSample>> {
    if sys.n() != 2 {
        return Err(Error::UnsupportedDimension(sys.n()));
    }
    if resolution < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let lerp = |(a, b): (f64, f64), k: usize| a + (b - a) * k as f64 / (resolution - 1) as f64;
    let tol = SimOptions::default().output_tol;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let x = DVector::from_vec(vec![lerp(x1_range, i), lerp(x2_range, j)]);
            let (_, w) = solve_output(sys, pwl, &x, None, tol)?;
            let dx = &sys.a * &x + &sys.b * w;
            out.push(FieldSample {
                x: [x[0], x[1]],
                dx: [dx[0], dx[1]],
            });
        }
    }
    Ok(out)
}

/// CSV with header `x1,x2,dx1,dx2`.
pub fn write_vector_field_csv<W: Write>(field: &[FieldSample], mut out: W) -> Result<()> {
    writeln!(out, "x1,x2,dx1,dx2")?;
    for s in field {
        writeln!(out, "{},{},{},{}", s.x[0], s.x[1], s.dx[0], s.dx[1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{dd_counterexample, dhd_counterexample};

    fn saturation() -> PiecewiseLinear {
        PiecewiseLinear::new(vec![(-1.0, -1.0), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn zero_d_output_is_direct() {
        let sys = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.1, -0.2]);
        let (z, w) = solve_output(&sys, &saturation(), &x, None, 1e-12).unwrap();
        assert_eq!(z, &sys.c * &x);
        assert_eq!(w, z);
    }

    #[test]
    fn zero_phi_gives_cx() {
        for sys in [dhd_counterexample(), dd_counterexample()] {
            let x = DVector::from_vec(vec![0.7, -0.3]);
            let (z, w) = solve_output(&sys, &PiecewiseLinear::zero(), &x, None, 1e-12).unwrap();
            assert!((z - &sys.c * &x).amax() < 1e-15);
            assert_eq!(w.amax(), 0.0);
        }
    }

    #[test]
    fn output_loop_residual_small_for_both_loop_kinds() {
        for sys in [dhd_counterexample(), dd_counterexample()] {
            let x = DVector::from_vec(vec![1.3, -0.4]);
            let (z, w) = solve_output(&sys, &saturation(), &x, None, 1e-12).unwrap();
            let r = &z - &sys.c * &x - &sys.d * &w;
            assert!(r.amax() <= 1e-12);
            assert!((w - z.map(|v| v.clamp(-1.0, 1.0))).amax() < 1e-15);
        }
    }

    #[test]
    fn origin_stays_put() {
        let sys = dhd_counterexample();
        let opts = SimOptions {
            t_end: 1.0,
            ..Default::default()
        };
        let tr = integrate(&sys, &saturation(), &DVector::zeros(2), &opts).unwrap();
        assert_eq!(tr.len(), 1001);
        assert_eq!(tr.max_deviation_from(&DVector::zeros(2)), 0.0);
        let eq = verify_equilibrium(&sys, &saturation(), &DVector::zeros(2), 1e-12).unwrap();
        assert_eq!(eq.residual, 0.0);
    }

    #[test]
    fn non_equilibrium_residual_is_direct_evaluation() {
        let sys = dhd_counterexample();
        let x = DVector::from_vec(vec![0.4, 0.9]);
        let eq = verify_equilibrium(&sys, &PiecewiseLinear::zero(), &x, 1e-6).unwrap();
        assert!((eq.residual - (&sys.a * &x).amax()).abs() < 1e-15);
        assert!(!eq.is_equilibrium);
    }

    #[test]
    fn grid_requires_planar_system() {
        let sys = StateSpace::new(
            DMatrix::identity(3, 3) * -1.0,
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 3),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let e = vector_field_grid(&sys, &PiecewiseLinear::zero(), (-1.0, 1.0), (-1.0, 1.0), 5);
        assert!(matches!(e, Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn grid_with_zero_phi_is_linear_field() {
        let sys = dhd_counterexample();
        let g =
            vector_field_grid(&sys, &PiecewiseLinear::zero(), (-1.0, 1.0), (-2.0, 2.0), 4).unwrap();
        assert_eq!(g.len(), 16);
        for s in g {
            let ax = &sys.a * DVector::from_column_slice(&s.x);
            assert!((ax[0] - s.dx[0]).abs() < 1e-15 && (ax[1] - s.dx[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn odd_phi_gives_odd_field() {
        let sys = dd_counterexample();
        let g = vector_field_grid(&sys, &saturation(), (-1.5, 1.5), (-1.5, 1.5), 7).unwrap();
        let n = g.len();
        for k in 0..n {
            let (a, b) = (g[k], g[n - 1 - k]);
            assert!((a.x[0] + b.x[0]).abs() < 1e-15);
            assert!((a.dx[0] + b.dx[0]).abs() < 1e-10 && (a.dx[1] + b.dx[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_layout() {
        let sys = dhd_counterexample();
        let opts = SimOptions {
            t_end: 0.002,
            ..Default::default()
        };
        let tr = integrate(
            &sys,
            &saturation(),
            &DVector::from_vec(vec![0.1, 0.2]),
            &opts,
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,z1,z2,z3,z4,w1,w2,w3,w4");
        assert_eq!(lines.len(), 4);
        let x1: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(x1, tr.states[1][0]);
    }

    #[test]
    fn rejects_bad_steps() {
        let sys = dhd_counterexample();
        let bad = SimOptions {
            dt: 0.0,
            ..Default::default()
        };
        assert!(integrate(&sys, &saturation(), &DVector::zeros(2), &bad).is_err());
        assert!(integrate(
            &sys,
            &saturation(),
            &DVector::zeros(3),
            &SimOptions::default()
        )
        .is_err());
    }
}
