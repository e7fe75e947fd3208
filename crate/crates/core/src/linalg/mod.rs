//! Dense linear-algebra substrate.

mod qr;
mod svd;
mod sylvester;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use qr::thin_qr;
pub use svd::{singular_values, svd, svd_with, Svd};
pub use sylvester::{solve_sylvester, solve_sylvester_with};

/// An `l x m` matrix of `f64` entries, the ambient space of every other object.
pub type DenseMatrix = DMatrix<f64>;

/// Fails with [`Error::NonFinite`] on the first NaN or infinite entry.
pub fn check_finite(a: &DenseMatrix) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn check_shape(a: &DenseMatrix, expected: (usize, usize)) -> Result<()> {
    if a.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            found: a.shape(),
        });
    }
    Ok(())
}

/// `Tr(A^T B)`.
pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    check_shape(b, a.shape())?;
    Ok(a.dot(b))
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Spectral (2-) norm.
pub fn operator_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}
