//! Small symmetric-matrix helpers shared by the state-evolution and engine
//! code. Matrices here are `r x r` with `r <= 4` or block matrices built
//! from such blocks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Error;
use crate::Result;

/// Eigenvalues below this magnitude are treated as zero when clamping.
pub const PSD_CLAMP: f64 = 1e-10;

/// Check symmetry and eigenvalue positivity down to `-tol`, then return the
/// symmetric PSD square root with negative eigenvalues clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return Err(Error::Domain(format!(
            "matrix not PSD (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Smallest eigenvalue of the symmetrized matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solve `m x = b` for symmetric positive semi-definite `m`, using the
/// eigendecomposition with clamped small eigenvalues (pseudo-inverse on the
/// null space).
pub fn psd_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| {
        if l.abs() < PSD_CLAMP {
            0.0
        } else {
            1.0 / l
        }
    }));
    &eig.eigenvectors * inv * eig.eigenvectors.transpose() * b
}

/// Assemble the `k*r x k*r` block matrix with block `(s, t)` given by
/// `blocks(s, t)` for `0 <= s, t < k`.
pub fn block_matrix(k: usize, r: usize, blocks: impl Fn(usize, usize) -> DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(k * r, k * r);
    for s in 0..k {
        for t in 0..k {
            let b = blocks(s, t);
            for i in 0..r {
                for j in 0..r {
                    out[(s * r + i, t * r + j)] = b[(i, j)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = psd_sqrt(&m, PSD_CLAMP).unwrap();
        let back = &s * &s;
        assert!((back - m).amax() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(psd_sqrt(&m, PSD_CLAMP).is_err());
    }

    #[test]
    fn solve_matches_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 4.0]);
        let x = psd_solve(&m, &b);
        assert!((m * x - b).amax() < 1e-12);
    }
}
