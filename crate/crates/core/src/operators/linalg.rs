//! Small dense helpers over `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation("matrix must have at least one row"));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::validation(format!("matrix must be square ({n} rows)")));
    }
    if rows.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("matrix construction"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    (m - m.transpose()).amax() <= tol
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `(I + t M) y = rhs` by LU with partial pivoting.
pub fn solve_shifted(m: &DMatrix<f64>, t: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    let a = DMatrix::identity(n, n) + m * t;
    solve(a, rhs)
}

pub fn solve(a: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let b = nalgebra::DVector::from_column_slice(rhs);
    let sol = a.lu().solve(&b).ok_or(Error::SingularSolve)?;
    if sol.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularSolve);
    }
    Ok(sol.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_norm_and_symmetry() {
        let r = matrix_from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!((spectral_norm(&r) - 1.0).abs() < 1e-14);
        assert!(!is_symmetric(&r, 1e-12));
        assert_eq!(symmetric_eigenvalues(&symmetric_part(&r)), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_ragged() {
        assert!(matrix_from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(matrix_from_rows(&[]).is_err());
    }

    #[test]
    fn shifted_solve() {
        let m = matrix_from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(solve_shifted(&m, 1.0, &[2.0]).unwrap(), vec![1.0]);
    }
}
