//! Dense linear solves for exact policy evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

/// Solves `matrix * x = rhs` with partially pivoted LU. `matrix` is
/// row-major `n x n`.
///
/// Partial pivoting permutes rows only, so a vanishing diagonal entry of `U`
/// identifies a column; the error carries that column, which callers map
/// back to a state index.
pub fn solve_dense(matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = matrix.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let lu = DMatrix::from_row_slice(n, n, &matrix).lu();
    let u = lu.u();
    if let Some(col) = (0..n).find(|&j| !(u[(j, j)].abs() > PIVOT_TOL * scale)) {
        return Err(Error::Singular { state: col });
    }
    let x = lu.solve(&DVector::from_vec(rhs)).ok_or(Error::Singular { state: n - 1 })?;
    Ok(x.iter().copied().collect())
}
