//! The LTI plant `ẋ = Ax + Bw`, `z = Cx + Dw` and its JSON file format.

use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::spectral_norm;

/// Largest `m` for which the vertex well-posedness test is attempted.
const MAX_VERTEX_TEST_DIM: usize = 16;

/// How the algebraic loop `z = Cx + DΦ(z)` is known to be uniquely solvable
/// for every `Φ = diag(φ)` with `φ ∈ slope[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopWellPosedness {
    /// `‖D‖₂ < 1`: `z ↦ Cx + DΦ(z)` is a contraction.
    Contractive,
    /// `det(I − DΔ) > 0` on every vertex `Δ ∈ {0, 1}^m`: every linear piece of
    /// `z ↦ z − DΦ(z)` has positive determinant, so the piecewise-linear map is
    /// a homeomorphism.
    CoherentlyOriented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    spectral_abscissa: f64,
    d_norm: f64,
    loop_kind: LoopWellPosedness,
}

/// On-disk layout: row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

fn from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(invalid(format!("matrix {name} is empty")));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(invalid(format!(
            "matrix {name} has rows of different lengths"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl StateSpace {
    /// Validates dimensions, Hurwitz `A`, and well-posedness of the loop.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if n == 0 || m == 0 {
            return Err(invalid(
                "system must have at least one state and one channel",
            ));
        }
        if a.ncols() != n {
            return Err(invalid(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(invalid(format!("B must have {n} rows, got {}", b.nrows())));
        }
        if c.shape() != (m, n) {
            return Err(invalid(format!(
                "C must be {m}x{n}, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if d.shape() != (m, m) {
            return Err(invalid(format!(
                "D must be {m}x{m}, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        if [&a, &b, &c, &d]
            .iter()
            .any(|x| x.iter().any(|v| !v.is_finite()))
        {
            return Err(invalid("system matrices contain non-finite entries"));
        }

        let spectral_abscissa = a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if spectral_abscissa >= 0.0 {
            return Err(invalid(format!(
                "A is not Hurwitz: largest eigenvalue real part is {spectral_abscissa:.6}"
            )));
        }

        let d_norm = spectral_norm(&d);
        let loop_kind = if d_norm < 1.0 {
            LoopWellPosedness::Contractive
        } else if vertex_determinants_positive(&d)? {
            warn!(
                "||D||_2 = {d_norm:.4} >= 1; the loop z = Cx + D phi(z) is still well-posed (all det(I - D*Delta) > 0)"
            );
            LoopWellPosedness::CoherentlyOriented
        } else {
            return Err(invalid(format!(
                "||D||_2 = {d_norm:.4} >= 1 and det(I - D*Delta) changes sign over Delta in {{0,1}}^m; \
                 the feedback loop is not well-posed for slope [0,1] nonlinearities"
            )));
        };

        Ok(Self {
            a,
            b,
            c,
            d,
            spectral_abscissa,
            d_norm,
            loop_kind,
        })
    }

    pub fn from_file_repr(f: &SystemFile) -> Result<Self> {
        Self::new(
            from_rows("A", &f.a)?,
            from_rows("B", &f.b)?,
            from_rows("C", &f.c)?,
            from_rows("D", &f.d)?,
        )
    }

    pub fn to_file_repr(&self) -> SystemFile {
        SystemFile {
            a: to_rows(&self.a),
            b: to_rows(&self.b),
            c: to_rows(&self.c),
            d: to_rows(&self.d),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(s)?;
        Self::from_file_repr(&f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file_repr())?)?;
        Ok(())
    }

    /// Number of states.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of nonlinear channels.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.spectral_abscissa
    }

    pub fn d_norm(&self) -> f64 {
        self.d_norm
    }

    pub fn is_d_contractive(&self) -> bool {
        self.loop_kind == LoopWellPosedness::Contractive
    }

    pub fn loop_well_posedness(&self) -> LoopWellPosedness {
        self.loop_kind
    }

    /// DC gain `D − C A⁻¹ B`.
    pub fn dc_gain(&self) -> DMatrix<f64> {
        let a_inv_b = self
            .a
            .clone()
            .lu()
            .solve(&self.b)
            .expect("Hurwitz A is invertible");
        &self.d - &self.c * a_inv_b
    }
}

fn vertex_determinants_positive(d: &DMatrix<f64>) -> Result<bool> {
    let m = d.nrows();
    if m > MAX_VERTEX_TEST_DIM {
        return Err(invalid(format!(
            "||D||_2 >= 1 and m = {m} is too large for the vertex well-posedness test"
        )));
    }
    let eye = DMatrix::<f64>::identity(m, m);
    for mask in 0u32..(1u32 << m) {
        let mut dd = d.clone();
        for j in 0..m {
            if mask & (1 << j) == 0 {
                dd.column_mut(j).fill(0.0);
            }
        }
        if (&eye - dd).determinant() <= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Plant of the slope-restricted example (doubly hyperdominant multipliers).
pub fn dhd_counterexample() -> StateSpace {
    StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[-2.11, 0.94, 0.77, -0.46]),
        DMatrix::from_row_slice(2, 4, &[0.28, -0.85, -0.94, -0.71, -0.82, -0.64, 0.45, 0.27]),
        DMatrix::from_row_slice(4, 2, &[0.58, -0.39, 0.13, -0.36, -0.25, 0.57, 0.64, 0.01]),
        DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.24, -0.28, 0.32, -0.04, //
                0.23, -0.42, 0.24, 0.29, //
                -0.34, -0.43, 0.26, -0.08, //
                0.42, 0.27, 0.46, 0.45,
            ],
        ),
    )
    .expect("built-in system is valid")
}

/// Plant of the odd slope-restricted example (doubly dominant multipliers).
pub fn dd_counterexample() -> StateSpace {
    StateSpace::new(
        DMatrix::from_row_slice(2, 2, &[-0.73, -0.99, -0.21, -0.44]),
        DMatrix::from_row_slice(
            2,
            4,
            &[-1.00, -0.72, -0.65, 0.20, -0.62, -0.46, -0.72, 0.80],
        ),
        DMatrix::from_row_slice(
            4,
            2,
            &[0.88, 0.05, -0.56, -0.47, -0.03, -0.86, -0.25, -0.13],
        ),
        DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.65, 0.92, 0.41, 0.54, //
                -0.95, 0.52, 0.29, -0.54, //
                0.91, -0.99, 0.10, -0.26, //
                -0.14, 0.36, -0.56, 0.78,
            ],
        ),
    )
    .expect("built-in system is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hurwitz() {
        let e = StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[0.1]),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        );
        assert!(e.unwrap_err().to_string().contains("Hurwitz"));
    }

    #[test]
    fn rejects_ill_posed_loop() {
        let e = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.5),
        );
        assert!(e.unwrap_err().to_string().contains("well-posed"));
    }

    #[test]
    fn rejects_bad_shapes() {
        let e = StateSpace::new(
            DMatrix::from_element(2, 2, -1.0),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(e.is_err());
    }

    #[test]
    fn built_in_examples() {
        let s = dhd_counterexample();
        assert!(s.is_d_contractive());
        assert!(s.d_norm() < 1.0);
        let s = dd_counterexample();
        assert!(!s.is_d_contractive());
        assert_eq!(
            s.loop_well_posedness(),
            LoopWellPosedness::CoherentlyOriented
        );
    }

    #[test]
    fn json_round_trip() {
        let s = dhd_counterexample();
        let text = serde_json::to_string(&s.to_file_repr()).unwrap();
        assert_eq!(StateSpace::from_json_str(&text).unwrap(), s);
        assert!(StateSpace::from_json_str(r#"{"A": [[1]], "B": [[1]]}"#).is_err());
    }
}
