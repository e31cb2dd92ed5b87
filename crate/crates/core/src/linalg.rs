//! Dense linear-algebra helpers over `nalgebra`.
//!
//! All solves go through LU with partial pivoting. A factorization is
//! rejected as singular when its smallest pivot is at most
//! [`PIVOT_TOL`] times the largest absolute entry of the matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-12;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Smallest absolute pivot of the partially pivoted LU factorization.
pub fn smallest_pivot(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows())
        .map(|i| u[(i, i)].abs())
        .fold(f64::INFINITY, f64::min)
}

fn check_nonsingular(m: &Matrix, what: &str) -> Result<()> {
    assert_eq!(m.nrows(), m.ncols(), "{what} must be square");
    if m.nrows() == 0 {
        return Ok(());
    }
    let pivot = smallest_pivot(m);
    let scale = max_abs(m);
    if !(pivot > PIVOT_TOL * scale) || !pivot.is_finite() {
        return Err(Error::Singular {
            what: what.to_string(),
            pivot,
        });
    }
    Ok(())
}

/// Solves `m x = rhs` for a matrix right-hand side.
pub fn solve(m: &Matrix, rhs: &Matrix, what: &str) -> Result<Matrix> {
    check_nonsingular(m, what)?;
    if m.nrows() == 0 {
        return Ok(Matrix::zeros(0, rhs.ncols()));
    }
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Singular {
        what: what.to_string(),
        pivot: 0.0,
    })
}

pub fn solve_vec(m: &Matrix, rhs: &Vector, what: &str) -> Result<Vector> {
    check_nonsingular(m, what)?;
    if m.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Singular {
        what: what.to_string(),
        pivot: 0.0,
    })
}

pub fn inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    solve(m, &Matrix::identity(m.nrows(), m.nrows()), what)
}

/// Submatrix with the given row and column index lists (in that order).
pub fn select(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn norm1(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number `‖m‖₁‖m⁻¹‖₁`; `1` for an empty matrix.
pub fn condition_1(m: &Matrix, inv: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    norm1(m) * norm1(inv)
}

pub fn determinant(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
