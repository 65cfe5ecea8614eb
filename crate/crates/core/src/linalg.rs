//! Small dense-matrix helpers on top of nalgebra.
//!
//! Everything here operates on symmetric positive (semi)definite matrices:
//! Cholesky-backed solves, explicit SPD inverses where a formula needs the
//! matrix itself, and a symmetric eigendecomposition with a deterministic
//! ordering and sign convention.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected as "not symmetric".
const SYMMETRY_RTOL: f64 = 1e-8;

/// Replace `m` by its symmetric part. The covariance/MSEM formulas are
/// symmetric in exact arithmetic; rounding asymmetry is folded back before a
/// matrix reaches the eigensolver or a factorization.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

fn check_symmetric(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Singular(format!(
            "{context}: matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(());
    }
    let scale = m.amax().max(1e-300);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::Singular(format!(
                    "{context}: matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Cholesky-factor a symmetric positive definite matrix, with a named error
/// on failure.
pub fn spd_cholesky(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    check_symmetric(m, context)?;
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{context}: Cholesky factorization failed")))
}

/// Solve `M x = b` for SPD `M`.
pub fn spd_solve_vec(m: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    Ok(spd_cholesky(m, context)?.solve(b))
}

/// Solve `M X = B` for SPD `M` and matrix right-hand side.
pub fn spd_solve_mat(m: &DMatrix<f64>, b: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(spd_cholesky(m, context)?.solve(b))
}

/// Explicit inverse of an SPD matrix. Used only where a report exposes the
/// inverse itself (covariances, MSEM); solves go through `spd_solve_*`.
pub fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&spd_cholesky(m, context)?.inverse()))
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and each eigenvector's largest-magnitude entry made
/// positive, so repeated runs produce identical output.
pub fn sym_eigen_desc(m: &DMatrix<f64>, context: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_symmetric(m, context)?;
    let n = m.nrows();
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let mut pivot = 0;
        for r in 1..n {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>, context: &str) -> Result<DVector<f64>> {
    Ok(sym_eigen_desc(m, context)?.0)
}

/// Largest eigenvalue of `N M^{-1}` for SPD `M` and symmetric PSD `N`,
/// computed on the symmetric congruence `L^{-1} N L^{-T}` (with `M = L L^T`)
/// so the spectrum is guaranteed real.
pub fn lambda_max_product(n_mat: &DMatrix<f64>, m_mat: &DMatrix<f64>, context: &str) -> Result<f64> {
    check_symmetric(n_mat, context)?;
    let chol = spd_cholesky(m_mat, context)?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(n_mat)
        .ok_or_else(|| Error::Singular(format!("{context}: triangular solve failed")))?;
    // (L^{-1} N) L^{-T} = (L^{-1} (L^{-1} N)^T)^T
    let z = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Singular(format!("{context}: triangular solve failed")))?;
    let vals = sym_eigenvalues_desc(&symmetrize(&z.transpose()), context)?;
    Ok(vals[0])
}

/// (min eigenvalue, max |eigenvalue|) of a symmetric matrix.
pub fn sym_eig_extremes(m: &DMatrix<f64>, context: &str) -> Result<(f64, f64)> {
    let vals = sym_eigenvalues_desc(m, context)?;
    let min = vals[vals.len() - 1];
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((min, scale))
}

/// Condition number (eigenvalue ratio) of an SPD matrix.
pub fn spd_condition_number(m: &DMatrix<f64>, context: &str) -> Result<f64> {
    let vals = sym_eigenvalues_desc(m, context)?;
    let max = vals[0];
    let min = vals[vals.len() - 1];
    if min <= 0.0 {
        return Err(Error::Singular(format!(
            "{context}: matrix is not positive definite (min eigenvalue {min:e})"
        )));
    }
    Ok(max / min)
}

/// Matrix to row-major nested vectors, for JSON output.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Row-major nested vectors to a matrix; rows must be rectangular.
pub fn from_rows(rows: &[Vec<f64>], context: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!(
            "{context}: ragged rows (expected {ncols} columns in every row)"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
