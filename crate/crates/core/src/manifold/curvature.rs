//! Principal curvatures of the rank-`r` manifold in a normal direction.

use super::{metric, project_tangent, weingarten, FixedRankPoint, NormalVector, TangentVector};
use crate::error::Result;
use crate::linalg::{svd, symmetric_eigen, DenseMatrix};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone)]
pub struct CurvatureEntry {
    pub kappa: f64,
    /// Unit-norm principal direction `(u_{r+j} v_i^T +- u_i v_{r+j}^T) / sqrt(2)`.
    pub direction: TangentVector,
    /// Index of the singular value of the base point.
    pub i: usize,
    /// Index of the singular value of the normal matrix.
    pub j: usize,
}

/// Nonzero principal curvatures `+-sigma_{r+j} / sigma_i`; every other
/// eigenvalue of the Weingarten map is zero.
#[derive(Debug, Clone)]
pub struct CurvatureSpectrum {
    pub entries: Vec<CurvatureEntry>,
    pub nonzero_count: usize,
    /// Numerical rank `k` of the normal matrix.
    pub normal_rank: usize,
    /// Multiplicity of the zero curvature, `(m - k) r + (l - k - r) r`.
    pub zero_count: usize,
}

pub fn curvature_spectrum(n: &NormalVector) -> Result<CurvatureSpectrum> {
    curvature_spectrum_with(n, &Tolerances::default())
}

pub fn curvature_spectrum_with(n: &NormalVector, tol: &Tolerances) -> Result<CurvatureSpectrum> {
    let base = n.base();
    let (l, m, r) = (base.rows(), base.cols(), base.rank());
    let tri = base.triplets()?;
    let nf = svd(n.matrix())?;
    let cutoff = tol.rank * nf.sigma.first().copied().unwrap_or(0.0);
    let k = nf.sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();

    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(2 * k * r);
    for i in 0..r {
        let ui = tri.left.column(i);
        let vi = tri.right.column(i);
        for j in 0..k {
            let un = nf.u.column(j);
            let vn = nf.v.column(j);
            let a = &un * vi.transpose();
            let b = &ui * vn.transpose();
            let kappa = nf.sigma[j] / tri.sigma[i];
            for sign in [1.0, -1.0] {
                let phi = (&a + &b * sign) * s2;
                entries.push(CurvatureEntry {
                    kappa: sign * kappa,
                    direction: project_tangent(base, &phi)?,
                    i,
                    j,
                });
            }
        }
    }
    Ok(CurvatureSpectrum {
        nonzero_count: entries.len(),
        entries,
        normal_rank: k,
        zero_count: (m - k) * r + (l - k - r) * r,
    })
}

/// Metric-orthonormal basis of the tangent space in horizontal coordinates:
/// `X_U = Q_perp E_ab (Z^T Z)^{-1/2}` and `X_Z = E_cd`.
pub fn tangent_basis(p: &FixedRankPoint) -> Result<Vec<TangentVector>> {
    let (l, m, r) = (p.rows(), p.cols(), p.rank());
    let proj = DenseMatrix::identity(l, l) - p.u() * p.u().transpose();
    let (_, vecs) = symmetric_eigen(&proj);
    let q_perp = vecs.columns(r, l - r).into_owned();

    let gram = p.z().transpose() * p.z();
    let (gvals, gvecs) = symmetric_eigen(&gram);
    let inv_sqrt = DenseMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        r,
        gvals.iter().map(|g| 1.0 / g.sqrt()),
    ));
    let g_inv_sqrt = &gvecs * inv_sqrt * gvecs.transpose();

    let mut basis = Vec::with_capacity(p.dimension());
    for a in 0..l - r {
        for b in 0..r {
            // Q_perp e_a e_b^T
            let mut qe = DenseMatrix::zeros(l, r);
            qe.set_column(b, &q_perp.column(a));
            basis.push(TangentVector::raw(
                p,
                qe * &g_inv_sqrt,
                DenseMatrix::zeros(m, r),
            ));
        }
    }
    for c in 0..m {
        for d in 0..r {
            let mut xz = DenseMatrix::zeros(m, r);
            xz[(c, d)] = 1.0;
            basis.push(TangentVector::raw(p, DenseMatrix::zeros(l, r), xz));
        }
    }
    Ok(basis)
}

/// Matrix of a tangent-space operator in a metric-orthonormal basis.
pub fn operator_matrix<F>(basis: &[TangentVector], mut op: F) -> Result<DenseMatrix>
where
    F: FnMut(&TangentVector) -> Result<TangentVector>,
{
    let d = basis.len();
    let mut a = DenseMatrix::zeros(d, d);
    for (col, b) in basis.iter().enumerate() {
        let image = op(b)?;
        for (row, e) in basis.iter().enumerate() {
            a[(row, col)] = metric(e, &image)?;
        }
    }
    Ok(a)
}

/// All `(l + m) r - r^2` eigenvalues of the assembled Weingarten operator,
/// ascending.
pub fn weingarten_eigenvalues(n: &NormalVector) -> Result<Vec<f64>> {
    let basis = tangent_basis(n.base())?;
    let a = operator_matrix(&basis, |x| weingarten(n, x))?;
    Ok(symmetric_eigen(&a).0)
}
