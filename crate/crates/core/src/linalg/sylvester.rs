use super::{check_finite, symmetric_eigen, DenseMatrix};
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// Solves `X A - M X = C` for symmetric `A` (`r x r`) and `M` (`n x n`).
///
/// Both operands are diagonalised, after which the equation decouples into
/// `Y_ij (a_j - m_i) = C'_ij` in the eigenbases.
pub fn solve_sylvester(a: &DenseMatrix, m: &DenseMatrix, c: &DenseMatrix) -> Result<DenseMatrix> {
    solve_sylvester_with(a, m, c, Tolerances::default().sylvester_separation)
}

pub fn solve_sylvester_with(
    a: &DenseMatrix,
    m: &DenseMatrix,
    c: &DenseMatrix,
    separation_tol: f64,
) -> Result<DenseMatrix> {
    let r = a.nrows();
    let n = m.nrows();
    if a.ncols() != r || m.ncols() != n {
        return Err(Error::InvalidArgument(
            "Sylvester operands must be square".into(),
        ));
    }
    if c.shape() != (n, r) {
        return Err(Error::ShapeMismatch {
            expected: (n, r),
            found: c.shape(),
        });
    }
    check_finite(a)?;
    check_finite(m)?;
    check_finite(c)?;

    let (ea, qa) = symmetric_eigen(a);
    let (em, qm) = symmetric_eigen(m);

    let scale = ea
        .iter()
        .chain(&em)
        .fold(f64::MIN_POSITIVE, |acc, x| acc.max(x.abs()));
    let mut closest = (f64::INFINITY, 0.0, 0.0);
    for &x in &ea {
        for &y in &em {
            let d = (x - y).abs();
            if d < closest.0 {
                closest = (d, x, y);
            }
        }
    }
    if closest.0 <= separation_tol * scale {
        return Err(Error::NearSingularSylvester {
            a: closest.1,
            m: closest.2,
            separation: closest.0,
        });
    }

    let mut y = qm.transpose() * c * &qa;
    for j in 0..r {
        for i in 0..n {
            y[(i, j)] /= ea[j] - em[i];
        }
    }
    Ok(qm * y * qa.transpose())
}
