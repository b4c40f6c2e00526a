//! Dense symmetric linear algebra.
//!
//! Everything here works on small matrices (dimension at most a few dozen), so
//! the eigensolver is a cyclic Jacobi sweep: slow asymptotically but accurate
//! to working precision and free of failure modes.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Off-diagonal Frobenius mass at which the Jacobi sweeps stop, relative to `‖S‖_F`.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Default relative threshold on `λ₂/λ₁` for accepting a rank-one factor.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Real symmetric matrix. Construction symmetrizes, so `(i, j)` and `(j, i)`
/// always hold the same bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds from a square matrix, replacing it by `(S + Sᵀ) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(invalid("symmetric matrix must have dimension >= 1"));
        }
        let n = m.nrows();
        let s = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            0.5 * (m[(a, b)] + m[(b, a)])
        });
        Ok(Self(s))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// `v vᵀ`.
    pub fn outer(v: &DVector<f64>) -> Self {
        Self(v * v.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Frobenius inner product `⟨S, T⟩ = trace(S T)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// Principal sub-block `[r0, r0 + rows) x [c0, c0 + cols)`; diagonal blocks stay symmetric.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DMatrix<f64> {
        self.0.view((r0, c0), (rows, cols)).into_owned()
    }
}

/// Symmetric eigendecomposition, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomposition {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let l = f(lam);
            if l == 0.0 {
                continue;
            }
            let col = v.column(k);
            out.ger(l, &col, &col, 1.0);
        }
        SymMatrix::new(out).expect("square by construction")
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// Eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(s: &SymMatrix) -> Result<EigDecomposition> {
    if !s.is_finite() {
        return Err(invalid("sym_eig: matrix has non-finite entries"));
    }
    let n = s.dim();
    let mut a = s.0.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();

    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| a[(k, k)]));
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `a[(p, q)]`.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Frobenius-nearest positive semidefinite matrix: negative eigenvalues clipped to zero.
pub fn project_psd(s: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(s)?;
    if eig.min() >= 0.0 {
        return Ok(s.clone());
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0)))
}

/// `h = √λ₁ v₁` when `λ₂/λ₁ ≤ rank_tol`, `None` otherwise.
///
/// The sign is fixed so that the largest-magnitude entry of `h` is positive.
/// A zero matrix is an error since it has no leading direction at all.
pub fn rank_one_factor(h: &SymMatrix, rank_tol: f64) -> Result<Option<DVector<f64>>> {
    match rank_one_ratio(h)? {
        (ratio, _) if ratio > rank_tol => Ok(None),
        (_, factor) => Ok(Some(factor)),
    }
}

/// Leading factor together with the ratio `λ₂/λ₁` (0 for 1x1 input).
pub fn rank_one_ratio(h: &SymMatrix) -> Result<(f64, DVector<f64>)> {
    let eig = sym_eig(h)?;
    let l1 = eig.eigenvalues[0];
    if l1 <= 0.0 {
        return Err(Error::NotRankOne { ratio: f64::NAN });
    }
    let ratio = if h.dim() > 1 {
        eig.eigenvalues[1].abs().max(eig.min().abs()) / l1
    } else {
        0.0
    };
    let mut v = eig.eigenvectors.column(0).into_owned() * l1.sqrt();
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v = -v;
    }
    Ok((ratio, v))
}

/// Length of the `svec` of a `k x k` symmetric matrix.
pub fn svec_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Isometric vectorization: column-major lower triangle, off-diagonals scaled by `√2`.
pub fn svec(s: &SymMatrix) -> Vec<f64> {
    let n = s.dim();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            let x = s.0[(i, j)];
            out.push(if i == j {
                x
            } else {
                x * std::f64::consts::SQRT_2
            });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<SymMatrix> {
    let k = svec_dim(v.len()).ok_or_else(|| {
        invalid(format!(
            "smat: length {} is not a triangular number",
            v.len()
        ))
    })?;
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in j..k {
            let x = if i == j {
                v[idx]
            } else {
                v[idx] / std::f64::consts::SQRT_2
            };
            m[(i, j)] = x;
            m[(j, i)] = x;
            idx += 1;
        }
    }
    Ok(SymMatrix(m))
}

/// Dimension `k` with `k(k+1)/2 == len`, if any.
pub fn svec_dim(len: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    let k = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (k.saturating_sub(1)..=k + 1).find(|&d| d > 0 && svec_len(d) == len)
}

/// `X + Xᵀ`.
pub fn he(x: &DMatrix<f64>) -> DMatrix<f64> {
    x + x.transpose()
}

/// Spectral norm of a general matrix, via the largest eigenvalue of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = SymMatrix::new(m.transpose() * m).expect("gram matrix is square");
    sym_eig(&g)
        .map(|e| e.max().max(0.0).sqrt())
        .unwrap_or(f64::NAN)
}
