//! Small dense-matrix helpers shared across modules.

use nalgebra::SymmetricEigen;

use crate::constants::CONDITION_LIMIT;
use crate::{CMatrix, CVector, Error, Result, C64};

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Largest singular value (spectral norm); zero for empty matrices.
pub fn sigma_max(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// 2-norm condition number of a square matrix. Empty matrices have condition 1.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    if sv.is_empty() {
        return 1.0;
    }
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverts `m` after checking its condition number against [`CONDITION_LIMIT`].
pub fn checked_inverse(m: &CMatrix, context: &str) -> Result<CMatrix> {
    checked_inverse_with_limit(m, context, CONDITION_LIMIT)
}

pub fn checked_inverse_with_limit(m: &CMatrix, context: &str, limit: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::invalid(format!("{context}: matrix is not square")));
    }
    if m.nrows() == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let cond = condition_number(m);
    if !(cond <= limit) {
        return Err(Error::IllConditioned {
            context: context.to_string(),
            cond,
            limit,
        });
    }
    m.clone().try_inverse().ok_or_else(|| Error::IllConditioned {
        context: context.to_string(),
        cond: f64::INFINITY,
        limit,
    })
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn vec_norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Checks that `m` is Hermitian to `tol` (relative to its largest entry) and
/// that its smallest eigenvalue is not below `-tol * scale`.
pub fn is_hermitian_psd(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    if m.nrows() == 0 {
        return true;
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    if max_abs(&(m - m.adjoint())) > tol * scale {
        return false;
    }
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::new(herm);
    eig.eigenvalues.iter().all(|&l| l >= -tol * scale)
}

/// Diagonal matrix from a slice.
pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

/// Copies `block` into `target` with its top-left corner at `(row, col)`.
pub fn set_block(target: &mut CMatrix, row: usize, col: usize, block: &CMatrix) {
    if block.nrows() == 0 || block.ncols() == 0 {
        return;
    }
    target
        .view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

pub fn block(m: &CMatrix, row: usize, col: usize, nrows: usize, ncols: usize) -> CMatrix {
    if nrows == 0 || ncols == 0 {
        return CMatrix::zeros(nrows, ncols);
    }
    m.view((row, col), (nrows, ncols)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_of_diagonal() {
        let m = diag(&[C64::new(1.0, 0.0), C64::new(0.0, 1e-3)]);
        assert!((condition_number(&m) - 1e3).abs() < 1e-6);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = CMatrix::from_element(2, 2, C64::new(1.0, 0.0));
        assert!(matches!(
            checked_inverse(&m, "test"),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn psd_detection() {
        let m = diag(&[C64::new(2.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(is_hermitian_psd(&m, 1e-12));
        let n = diag(&[C64::new(2.0, 0.0), C64::new(-1.0, 0.0)]);
        assert!(!is_hermitian_psd(&n, 1e-12));
    }
}
