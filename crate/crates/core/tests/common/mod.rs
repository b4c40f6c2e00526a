#![allow(dead_code)]

use lure::matrix::spectral_norm;
use lure::{PiecewiseLinear, StateSpace};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Box–Muller standard normal sample.
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = normal_matrix(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// `A` is shifted to have spectral abscissa in `[-1, -0.1]`; `‖D‖₂ ≤ d_max`.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, d_max: f64) -> StateSpace {
    let a0 = normal_matrix(rng, n, n);
    let abscissa = a0
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let a = a0 - DMatrix::identity(n, n) * (abscissa + rng.random_range(0.1..1.0));
    let d0 = normal_matrix(rng, m, m);
    let d = &d0 * (rng.random_range(0.0..d_max) / spectral_norm(&d0));
    StateSpace::new(a, normal_matrix(rng, n, m), normal_matrix(rng, m, n), d)
        .expect("valid by construction")
}

/// Z-matrix with nonnegative row and column sums.
pub fn random_dhd<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let mut x: DMatrix<f64> = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            -rng.random_range(0.0..2.0)
        }
    });
    for i in 0..m {
        let need = (-x.row(i).sum()).max(-x.column(i).sum());
        x[(i, i)] = need + rng.random_range(0.0..0.5);
    }
    x
}

/// Diagonal dominating the absolute off-diagonal mass by rows and columns.
pub fn random_dd<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let mut x: DMatrix<f64> = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    for i in 0..m {
        let row: f64 = x.row(i).iter().map(|v: &f64| v.abs()).sum();
        let col: f64 = x.column(i).iter().map(|v: &f64| v.abs()).sum();
        x[(i, i)] = row.max(col) + rng.random_range(0.0..0.5);
    }
    x
}

/// Random piecewise-linear map through the origin with segment slopes in
/// `[0, 1]`; odd when requested.
pub fn random_slope_map<R: Rng + ?Sized>(rng: &mut R, odd: bool) -> PiecewiseLinear {
    let k = rng.random_range(1..6);
    let mut right: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..3.0)).collect();
    right.sort_by(f64::total_cmp);
    right.dedup();
    let mut pts = vec![(0.0, 0.0)];
    let (mut z, mut w) = (0.0, 0.0);
    for &zr in &right {
        w += rng.random_range(0.0..=1.0) * (zr - z);
        z = zr;
        pts.push((z, w));
    }
    if odd {
        let mirrored: Vec<(f64, f64)> = pts[1..].iter().rev().map(|&(z, w)| (-z, -w)).collect();
        pts = mirrored.into_iter().chain(pts).collect();
    } else {
        let kl = rng.random_range(1..6);
        let mut left: Vec<f64> = (0..kl).map(|_| -rng.random_range(0.01..3.0)).collect();
        left.sort_by(|a, b| b.total_cmp(a));
        left.dedup();
        let (mut z, mut w) = (0.0, 0.0);
        let mut lp = Vec::new();
        for &zl in &left {
            w -= rng.random_range(0.0..=1.0) * (z - zl);
            z = zl;
            lp.push((z, w));
        }
        lp.reverse();
        pts = lp.into_iter().chain(pts).collect();
    }
    PiecewiseLinear::new(pts).expect("strictly increasing by construction")
}

/// `[ζ; Φ(ζ)]ᵀ 𝓜 [ζ; Φ(ζ)]` written out as `2(ζ − w)ᵀMw`, independent of the
/// multiplier assembly.
pub fn lemma_form_direct(m: &DMatrix<f64>, zeta: &DVector<f64>, w: &DVector<f64>) -> f64 {
    2.0 * (zeta - w).dot(&(m * w))
}
