//! Closed convex cones used by the LMIs, their Euclidean projections, and the
//! membership tests for the OZF multiplier matrix classes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{project_psd, smat, svec, svec_len};

/// Absolute tolerance for membership tests on solver output.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

/// A cone together with the vectorization the solver uses for it.
///
/// * `Psd(k)`: `svec` of a `k x k` symmetric matrix.
/// * `ZeroDiagZ(m)`: hollow Z-matrices, stored as the full row-major `m x m` matrix.
/// * the rest are plain vectors of the given length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeSpec {
    Psd(usize),
    NonnegOrthant(usize),
    ZeroDiagZ(usize),
    Free(usize),
    Zero(usize),
}

impl ConeSpec {
    /// Length of a vectorized point of this cone.
    pub fn vec_len(&self) -> usize {
        match *self {
            ConeSpec::Psd(k) => svec_len(k),
            ConeSpec::ZeroDiagZ(m) => m * m,
            ConeSpec::NonnegOrthant(d) | ConeSpec::Free(d) | ConeSpec::Zero(d) => d,
        }
    }

    /// Euclidean projection of a vectorized point onto the cone.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = point.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    pub fn project_in_place(&self, point: &mut [f64]) -> Result<()> {
        if point.len() != self.vec_len() {
            return Err(invalid(format!(
                "point of length {} does not match cone {:?} (length {})",
                point.len(),
                self,
                self.vec_len()
            )));
        }
        match *self {
            ConeSpec::Free(_) => {}
            ConeSpec::Zero(_) => point.iter_mut().for_each(|x| *x = 0.0),
            ConeSpec::NonnegOrthant(_) => point.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeSpec::ZeroDiagZ(m) => {
                for i in 0..m {
                    for j in 0..m {
                        let x = &mut point[i * m + j];
                        *x = if i == j { 0.0 } else { x.min(0.0) };
                    }
                }
            }
            ConeSpec::Psd(_) => {
                let p = project_psd(&smat(point)?)?;
                point.copy_from_slice(&svec(&p));
            }
        }
        Ok(())
    }

    /// Euclidean distance from a vectorized point to the cone.
    pub fn distance(&self, point: &[f64]) -> Result<f64> {
        let p = self.project(point)?;
        Ok(point
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Projection of a full matrix onto hollow Z-matrices.
pub fn project_zero_diag_z(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if i == j {
            0.0
        } else {
            x[(i, j)].min(0.0)
        }
    })
}

/// Row-major flattening, the storage order of `ZeroDiagZ` blocks.
pub fn flatten_rows(x: &DMatrix<f64>) -> Vec<f64> {
    x.transpose().as_slice().to_vec()
}

pub fn unflatten_rows(v: &[f64], m: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, m, v)
}

/// `|M|_d`: keeps the diagonal, replaces every off-diagonal entry by `-|M_ij|`.
pub fn abs_d(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i == j {
            m[(i, j)]
        } else {
            -m[(i, j)].abs()
        }
    })
}

fn has_nonneg_line_sums(m: &DMatrix<f64>, tol: f64) -> bool {
    let rows_ok = m.row_iter().all(|r| r.sum() >= -tol);
    let cols_ok = m.column_iter().all(|c| c.sum() >= -tol);
    rows_ok && cols_ok
}

/// Z-matrix with nonnegative row and column sums.
pub fn is_doubly_hyperdominant(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let z_matrix = (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] <= tol));
    z_matrix && has_nonneg_line_sums(m, tol)
}

/// `|M|_d 1 ≥ 0` and `1ᵀ|M|_d ≥ 0`.
pub fn is_doubly_dominant(m: &DMatrix<f64>, tol: f64) -> bool {
    m.nrows() == m.ncols() && has_nonneg_line_sums(&abs_d(m), tol)
}

/// Checks the split `M = M_d + M_od` with bound `M̄_od` used by the
/// doubly-dominant primal: `(M_d − M̄_od)1 ≥ 0`, `1ᵀ(M_d − M̄_od) ≥ 0`,
/// `M̄_od − M_od ≥ 0`, `M̄_od + M_od ≥ 0`.
///
/// Shape violations (off-diagonal mass in `m_d`, diagonal mass in the hollow
/// parts) are input errors, not a `false`.
pub fn decompose_dd_vars(
    m_d: &DMatrix<f64>,
    m_od: &DMatrix<f64>,
    m_od_bar: &DMatrix<f64>,
    tol: f64,
) -> Result<bool> {
    let m = m_d.nrows();
    for (name, x) in [("M_d", m_d), ("M_od", m_od), ("M̄_od", m_od_bar)] {
        if x.nrows() != m || x.ncols() != m {
            return Err(invalid(format!("{name} must be {m}x{m}")));
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i != j && m_d[(i, j)] != 0.0 {
                return Err(invalid("M_d must be diagonal"));
            }
            if i == j && (m_od[(i, i)] != 0.0 || m_od_bar[(i, i)] != 0.0) {
                return Err(invalid("M_od and M̄_od must have zero diagonal"));
            }
        }
    }
    let dominance = has_nonneg_line_sums(&(m_d - m_od_bar), tol);
    let bounds = (m_od_bar - m_od).iter().all(|&x| x >= -tol)
        && (m_od_bar + m_od).iter().all(|&x| x >= -tol);
    Ok(dominance && bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        let n = rows.len();
        DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn zero_diag_z_projection() {
        let p = ConeSpec::ZeroDiagZ(2)
            .project(&[5.0, 2.0, -3.0, -1.0])
            .unwrap();
        assert_eq!(p, vec![0.0, 0.0, -3.0, 0.0]);
        let x = mat(&[&[5.0, 2.0], &[-3.0, -1.0]]);
        assert_eq!(project_zero_diag_z(&x), mat(&[&[0.0, 0.0], &[-3.0, 0.0]]));
    }

    #[test]
    fn orthant_projection() {
        assert_eq!(
            ConeSpec::NonnegOrthant(2).project(&[-1.0, 2.0]).unwrap(),
            vec![0.0, 2.0]
        );
    }

    #[test]
    fn members_are_fixed_points() {
        let cases: Vec<(ConeSpec, Vec<f64>)> = vec![
            (ConeSpec::NonnegOrthant(3), vec![0.0, 1.0, 2.5]),
            (ConeSpec::ZeroDiagZ(2), vec![0.0, -1.0, -0.5, 0.0]),
            (ConeSpec::Free(2), vec![-4.0, 3.0]),
            (ConeSpec::Zero(2), vec![0.0, 0.0]),
            (ConeSpec::Psd(2), vec![2.0, 0.5, 1.0]),
        ];
        for (cone, p) in cases {
            let q = cone.project(&p).unwrap();
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-12, "{cone:?}");
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(ConeSpec::Psd(3).project(&[1.0; 5]).is_err());
    }

    #[test]
    fn hyperdominance_examples() {
        assert!(is_doubly_hyperdominant(
            &DMatrix::identity(3, 3),
            DEFAULT_MEMBERSHIP_TOL
        ));
        assert!(!is_doubly_hyperdominant(
            &mat(&[&[1.0, -2.0], &[0.0, 1.0]]),
            DEFAULT_MEMBERSHIP_TOL
        ));
        // Z-matrix, row sums (1, 1), column sums (1, 1)
        assert!(is_doubly_hyperdominant(
            &mat(&[&[2.0, -1.0], &[-1.0, 2.0]]),
            DEFAULT_MEMBERSHIP_TOL
        ));
    }

    #[test]
    fn dominance_examples() {
        // |M|_d = [[2,-1],[-1,2]] with sums (1, 1)
        let m = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!(is_doubly_dominant(&m, DEFAULT_MEMBERSHIP_TOL));
        assert!(!is_doubly_hyperdominant(&m, DEFAULT_MEMBERSHIP_TOL));
        // |M|_d = [[1,-3],[0,1]], first row sums to -2
        assert!(!is_doubly_dominant(
            &mat(&[&[1.0, 3.0], &[0.0, 1.0]]),
            DEFAULT_MEMBERSHIP_TOL
        ));
        assert!(is_doubly_dominant(
            &mat(&[&[2.0, -1.0], &[-1.0, 2.0]]),
            DEFAULT_MEMBERSHIP_TOL
        ));
    }

    #[test]
    fn dd_split_examples() {
        let z = DMatrix::zeros(3, 3);
        assert!(
            decompose_dd_vars(&DMatrix::identity(3, 3), &z, &z, DEFAULT_MEMBERSHIP_TOL).unwrap()
        );

        let m_d = DMatrix::identity(3, 3) * 2.0;
        let m_od = mat(&[&[0.0, 1.0, -1.0], &[-1.0, 0.0, 1.0], &[1.0, -1.0, 0.0]]);
        let bar = m_od.abs();
        assert!(decompose_dd_vars(&m_d, &m_od, &bar, DEFAULT_MEMBERSHIP_TOL).unwrap());
        assert!(is_doubly_dominant(&(&m_d + &m_od), DEFAULT_MEMBERSHIP_TOL));

        let mut neg = bar.clone();
        neg[(0, 1)] = -0.5;
        assert!(!decompose_dd_vars(&m_d, &z, &neg, DEFAULT_MEMBERSHIP_TOL).unwrap());
    }

    #[test]
    fn dd_split_shape_errors() {
        let z = DMatrix::zeros(2, 2);
        let full = DMatrix::from_element(2, 2, 1.0);
        assert!(decompose_dd_vars(&full, &z, &z, 1e-9).is_err());
        assert!(
            decompose_dd_vars(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2), &z, 1e-9)
                .is_err()
        );
    }
}
