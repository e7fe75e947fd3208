use super::{check_finite, DenseMatrix};
use crate::error::{Error, Result};

/// Householder thin QR, `A = Q R` with `Q^T Q = I` and `diag(R) >= 0`.
///
/// Rank-deficient input is allowed; `R` is then singular.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    check_finite(a)?;
    let (rows, cols) = a.shape();
    if cols > rows {
        return Err(Error::InvalidArgument(format!(
            "thin_qr needs cols <= rows, got {rows}x{cols}"
        )));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    Ok((q, r))
}
