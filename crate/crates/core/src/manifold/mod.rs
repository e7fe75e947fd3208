//! The manifold of rank-`r` matrices `R = U Z^T` with `U^T U = I`.
//!
//! Tangent vectors are stored in the horizontal parameterization
//! `X = X_U Z^T + U X_Z^T` with `U^T X_U = 0`, in which the metric inherited
//! from the Frobenius product reads `Tr(Z^T Z X_U^T Y_U + X_Z^T Y_Z)`.

mod curvature;
mod geodesic;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, check_shape, svd, thin_qr, DenseMatrix};
use crate::tolerances::Tolerances;

pub use curvature::{
    curvature_spectrum, curvature_spectrum_with, operator_matrix, tangent_basis, weingarten_eigenvalues, CurvatureEntry,
    CurvatureSpectrum,
};
pub use geodesic::{exp_map, geodesic_path, GeodesicSample, DEFAULT_GEODESIC_STEPS};

#[derive(Debug)]
struct PointData {
    u: DenseMatrix,
    z: DenseMatrix,
    gram_inv: DenseMatrix,
}

/// A point `R = U Z^T` of the rank-`r` manifold.
///
/// Cloning is cheap; tangent and normal vectors hold a clone of their base.
#[derive(Debug, Clone)]
pub struct FixedRankPoint {
    inner: Arc<PointData>,
}

/// Singular triplets of a point, `R = left diag(sigma) right^T`.
#[derive(Debug, Clone)]
pub struct PointTriplets {
    pub sigma: Vec<f64>,
    pub left: DenseMatrix,
    pub right: DenseMatrix,
}

impl FixedRankPoint {
    pub fn new(u: DenseMatrix, z: DenseMatrix) -> Result<Self> {
        Self::new_with(u, z, &Tolerances::default())
    }

    pub fn new_with(u: DenseMatrix, z: DenseMatrix, tol: &Tolerances) -> Result<Self> {
        let r = u.ncols();
        if r == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        if z.ncols() != r {
            return Err(Error::ShapeMismatch {
                expected: (z.nrows(), r),
                found: z.shape(),
            });
        }
        if r > u.nrows() || r > z.nrows() {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds matrix dimensions {}x{}",
                u.nrows(),
                z.nrows()
            )));
        }
        check_finite(&u)?;
        check_finite(&z)?;
        let deviation = (u.transpose() * &u - DenseMatrix::identity(r, r)).norm();
        if deviation > tol.orthonormality {
            return Err(Error::NotOrthonormal { deviation });
        }
        let sz = svd(&z)?.sigma;
        if !(sz[r - 1] > tol.rank * sz[0]) {
            return Err(Error::RankDeficient {
                rank: r,
                sigma_r: sz[r - 1],
                sigma_1: sz[0],
            });
        }
        let gram = z.transpose() * &z;
        let gram_inv = gram
            .cholesky()
            .ok_or(Error::RankDeficient {
                rank: r,
                sigma_r: sz[r - 1],
                sigma_1: sz[0],
            })?
            .inverse();
        Ok(Self {
            inner: Arc::new(PointData { u, z, gram_inv }),
        })
    }

    /// Best rank-`r` factorization of `dense`: `U` = leading left singular
    /// vectors, `Z = V_r diag(sigma_1..sigma_r)`.
    pub fn from_dense(dense: &DenseMatrix, r: usize) -> Result<Self> {
        Self::from_dense_with(dense, r, &Tolerances::default())
    }

    pub fn from_dense_with(dense: &DenseMatrix, r: usize, tol: &Tolerances) -> Result<Self> {
        let p = dense.nrows().min(dense.ncols());
        if r == 0 || r > p {
            return Err(Error::InvalidArgument(format!(
                "rank {r} must lie in 1..={p}"
            )));
        }
        let f = svd(dense)?;
        if !(f.sigma[r - 1] > tol.rank * f.sigma[0]) {
            return Err(Error::RankDeficient {
                rank: r,
                sigma_r: f.sigma[r - 1],
                sigma_1: f.sigma[0],
            });
        }
        let u = f.u.columns(0, r).into_owned();
        let mut z = f.v.columns(0, r).into_owned();
        for k in 0..r {
            z.column_mut(k).scale_mut(f.sigma[k]);
        }
        Self::new_with(u, z, tol)
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.inner.u
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.inner.z
    }

    /// `(Z^T Z)^{-1}`.
    pub fn gram_inv(&self) -> &DenseMatrix {
        &self.inner.gram_inv
    }

    pub fn rows(&self) -> usize {
        self.inner.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.z.nrows()
    }

    pub fn rank(&self) -> usize {
        self.inner.u.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// Manifold dimension `(l + m) r - r^2`.
    pub fn dimension(&self) -> usize {
        let r = self.rank();
        (self.rows() + self.cols()) * r - r * r
    }

    pub fn dense(&self) -> DenseMatrix {
        self.u() * self.z().transpose()
    }

    /// `Z (Z^T Z)^{-1}`.
    pub fn z_pinv_t(&self) -> DenseMatrix {
        self.z() * self.gram_inv()
    }

    pub fn triplets(&self) -> Result<PointTriplets> {
        let f = svd(self.z())?;
        let mut left = self.u() * &f.v;
        let mut right = f.u;
        for k in 0..self.rank() {
            let col = left.column(k);
            let imax = col.iamax();
            if col[imax] < 0.0 {
                left.column_mut(k).neg_mut();
                right.column_mut(k).neg_mut();
            }
        }
        Ok(PointTriplets {
            sigma: f.sigma,
            left,
            right,
        })
    }

    /// `(U P, Z P)` for an orthogonal `P`: the same dense matrix in another gauge.
    pub fn rotated(&self, p: &DenseMatrix) -> Result<Self> {
        check_shape(p, (self.rank(), self.rank()))?;
        Self::new(self.u() * p, self.z() * p)
    }

    pub fn same_base(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.u == other.inner.u && self.inner.z == other.inner.z)
    }

    fn check_ambient(&self, amb: &DenseMatrix) -> Result<()> {
        check_shape(amb, self.shape())
    }
}

/// Restores `U^T U = I` on drifted raw factors without changing `U Z^T`:
/// `U = Q R_f`, `Z <- Z R_f^T`.
pub fn gauge_fix(u: &DenseMatrix, z: &DenseMatrix) -> Result<FixedRankPoint> {
    if u.ncols() != z.ncols() {
        return Err(Error::ShapeMismatch {
            expected: (z.nrows(), u.ncols()),
            found: z.shape(),
        });
    }
    let (q, rf) = thin_qr(u)?;
    let r = u.ncols();
    let dmax = (0..r).map(|k| rf[(k, k)]).fold(0.0, f64::max);
    let dmin = (0..r).map(|k| rf[(k, k)]).fold(f64::INFINITY, f64::min);
    if !(dmin > Tolerances::default().rank * dmax) {
        return Err(Error::RankDeficient {
            rank: r,
            sigma_r: dmin,
            sigma_1: dmax,
        });
    }
    FixedRankPoint::new(q, z * rf.transpose())
}

/// Evaluates a horizontal velocity field at raw (drifted) factors.
///
/// The factors are gauge-fixed, `f` is evaluated there, and the velocity is
/// mapped back so that `dU Z^T + U dZ^T` is the same dense velocity.
pub(crate) fn eval_in_orthonormal_gauge<F>(
    u: &DenseMatrix,
    z: &DenseMatrix,
    f: F,
) -> Result<(DenseMatrix, DenseMatrix)>
where
    F: FnOnce(&FixedRankPoint) -> Result<(DenseMatrix, DenseMatrix)>,
{
    let (q, rf) = thin_qr(u)?;
    let p = FixedRankPoint::new(q, z * rf.transpose())?;
    let (du, dz) = f(&p)?;
    let rf_inv_t = rf
        .transpose()
        .solve_lower_triangular(&DenseMatrix::identity(rf.nrows(), rf.nrows()))
        .ok_or(Error::RankDeficient {
            rank: rf.nrows(),
            sigma_r: 0.0,
            sigma_1: rf.norm(),
        })?;
    // Z = Z' R_f^{-T}, so dZ = dZ' R_f^{-T}; dU = dU' R_f.
    Ok((du * rf, dz * rf_inv_t))
}

/// A tangent vector in horizontal coordinates.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: FixedRankPoint,
    xu: DenseMatrix,
    xz: DenseMatrix,
}

impl TangentVector {
    pub fn new(base: &FixedRankPoint, xu: DenseMatrix, xz: DenseMatrix) -> Result<Self> {
        Self::new_with(base, xu, xz, &Tolerances::default())
    }

    pub fn new_with(
        base: &FixedRankPoint,
        xu: DenseMatrix,
        xz: DenseMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        check_shape(&xu, base.u().shape())?;
        check_shape(&xz, base.z().shape())?;
        check_finite(&xu)?;
        check_finite(&xz)?;
        let deviation = (base.u().transpose() * &xu).norm();
        if deviation > tol.orthonormality * xu.norm().max(1.0) {
            return Err(Error::NotHorizontal { deviation });
        }
        Ok(Self {
            base: base.clone(),
            xu,
            xz,
        })
    }

    /// Removes the vertical part of `xu` instead of rejecting it.
    pub fn horizontalized(base: &FixedRankPoint, xu: DenseMatrix, xz: DenseMatrix) -> Result<Self> {
        check_shape(&xu, base.u().shape())?;
        check_shape(&xz, base.z().shape())?;
        let xu = horizontal_part(base.u(), xu);
        Ok(Self::raw(base, xu, xz))
    }

    pub(crate) fn raw(base: &FixedRankPoint, xu: DenseMatrix, xz: DenseMatrix) -> Self {
        Self {
            base: base.clone(),
            xu,
            xz,
        }
    }

    pub fn zero(base: &FixedRankPoint) -> Self {
        Self::raw(
            base,
            DenseMatrix::zeros(base.rows(), base.rank()),
            DenseMatrix::zeros(base.cols(), base.rank()),
        )
    }

    pub fn base(&self) -> &FixedRankPoint {
        &self.base
    }

    pub fn xu(&self) -> &DenseMatrix {
        &self.xu
    }

    pub fn xz(&self) -> &DenseMatrix {
        &self.xz
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.xu, self.xz)
    }

    pub fn dense(&self) -> DenseMatrix {
        &self.xu * self.base.z().transpose() + self.base.u() * self.xz.transpose()
    }

    /// Metric norm.
    pub fn norm(&self) -> f64 {
        metric(self, self).expect("same base").max(0.0).sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::raw(&self.base, &self.xu * c, &self.xz * c)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        if !self.base.same_base(&other.base) {
            return Err(Error::BaseMismatch);
        }
        Ok(Self::raw(
            &self.base,
            &self.xu + &other.xu * c,
            &self.xz + &other.xz * c,
        ))
    }
}

/// A matrix in the normal space: `U^T N = 0`, `N Z = 0`.
#[derive(Debug, Clone)]
pub struct NormalVector {
    base: FixedRankPoint,
    n: DenseMatrix,
}

impl NormalVector {
    pub fn new(base: &FixedRankPoint, n: DenseMatrix) -> Result<Self> {
        Self::new_with(base, n, &Tolerances::default())
    }

    pub fn new_with(base: &FixedRankPoint, n: DenseMatrix, tol: &Tolerances) -> Result<Self> {
        base.check_ambient(&n)?;
        check_finite(&n)?;
        let scale = n.norm().max(1e-6 * base.z().norm());
        let left = (base.u().transpose() * &n).norm();
        let right = (&n * base.z()).norm() / base.z().norm();
        let deviation = left.max(right);
        if deviation > tol.orthonormality * scale {
            return Err(Error::NotNormal { deviation });
        }
        Ok(Self {
            base: base.clone(),
            n,
        })
    }

    pub(crate) fn raw(base: &FixedRankPoint, n: DenseMatrix) -> Self {
        Self {
            base: base.clone(),
            n,
        }
    }

    pub fn base(&self) -> &FixedRankPoint {
        &self.base
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.n
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.n
    }
}

fn horizontal_part(u: &DenseMatrix, x: DenseMatrix) -> DenseMatrix {
    let ux = u.transpose() * &x;
    x - u * ux
}

/// Frobenius-orthogonal projection onto the tangent space:
/// `X_U = (I - U U^T) amb Z (Z^T Z)^{-1}`, `X_Z = amb^T U`.
pub fn project_tangent(base: &FixedRankPoint, amb: &DenseMatrix) -> Result<TangentVector> {
    base.check_ambient(amb)?;
    let w = amb * base.z_pinv_t();
    let xu = horizontal_part(base.u(), w);
    let xz = amb.transpose() * base.u();
    Ok(TangentVector::raw(base, xu, xz))
}

/// `(I - U U^T) amb (I - Z (Z^T Z)^{-1} Z^T)`.
pub fn project_normal(base: &FixedRankPoint, amb: &DenseMatrix) -> Result<NormalVector> {
    base.check_ambient(amb)?;
    let a1 = horizontal_part(base.u(), amb.clone());
    let n = &a1 - (&a1 * base.z_pinv_t()) * base.z().transpose();
    Ok(NormalVector::raw(base, n))
}

pub fn metric(x: &TangentVector, y: &TangentVector) -> Result<f64> {
    if !x.base.same_base(&y.base) {
        return Err(Error::BaseMismatch);
    }
    let gram = x.base.z().transpose() * x.base.z();
    Ok((&x.xu * gram).dot(&y.xu) + x.xz.dot(&y.xz))
}

/// `-(I - Pi_T)(X_U Y_Z^T + Y_U X_Z^T)`.
pub fn christoffel(x: &TangentVector, y: &TangentVector) -> Result<NormalVector> {
    if !x.base.same_base(&y.base) {
        return Err(Error::BaseMismatch);
    }
    let m = &x.xu * y.xz.transpose() + &y.xu * x.xz.transpose();
    let n = project_normal(&x.base, &m)?;
    Ok(NormalVector::raw(&x.base, -n.n))
}

/// Weingarten map `L_R(N) X = (N X_Z (Z^T Z)^{-1}, N^T X_U)`.
pub fn weingarten(n: &NormalVector, x: &TangentVector) -> Result<TangentVector> {
    if !n.base.same_base(&x.base) {
        return Err(Error::BaseMismatch);
    }
    let xu = &n.n * &x.xz * x.base.gram_inv();
    let xz = n.n.transpose() * &x.xu;
    Ok(TangentVector::raw(&x.base, xu, xz))
}

/// Covariant derivative of the field `Y` along `X`, given the ambient
/// directional derivatives `dY_U = D_X Y_U` and `dY_Z = D_X Y_Z`.
pub fn covariant_derivative(
    x: &TangentVector,
    y: &TangentVector,
    dyu: &DenseMatrix,
    dyz: &DenseMatrix,
) -> Result<TangentVector> {
    if !x.base.same_base(&y.base) {
        return Err(Error::BaseMismatch);
    }
    let p = &x.base;
    check_shape(dyu, p.u().shape())?;
    check_shape(dyz, p.z().shape())?;
    let cross = &x.xu * y.xz.transpose() + &y.xu * x.xz.transpose();
    let vu = dyu + p.u() * (x.xu.transpose() * &y.xu) + cross * p.z_pinv_t();
    let vz = dyz - p.z() * (y.xu.transpose() * &x.xu);
    Ok(TangentVector::raw(p, horizontal_part(p.u(), vu), vz))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> DenseMatrix {
        let mut v = DenseMatrix::zeros(n, 1);
        v[(i, 0)] = 1.0;
        v
    }

    fn outer(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        a * b.transpose()
    }

    pub(crate) fn random_point(seed: u64, l: usize, m: usize, r: usize) -> FixedRankPoint {
        let mut g = rng::seeded(seed);
        let u = rng::random_orthonormal(&mut g, l, r);
        let z = rng::gaussian_matrix(&mut g, m, r);
        FixedRankPoint::new(u, z).unwrap()
    }

    pub(crate) fn random_tangent(g: &mut rng::Rng, p: &FixedRankPoint) -> TangentVector {
        let a = rng::gaussian_matrix(g, p.rows(), p.cols());
        project_tangent(p, &a).unwrap()
    }

    #[test]
    fn factor_from_dense_examples() {
        let d = DenseMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let p = FixedRankPoint::from_dense(&d, 2).unwrap();
        assert_eq!(p.u(), &DenseMatrix::identity(2, 2));
        assert_eq!(p.z(), &d);

        let e11 = outer(&e(2, 0), &e(2, 0));
        let p = FixedRankPoint::from_dense(&e11, 1).unwrap();
        assert_eq!(p.u(), &e(2, 0));
        assert_eq!(p.z(), &e(2, 0));

        let mut g = rng::seeded(8);
        let r2 = rng::gaussian_matrix(&mut g, 4, 2) * rng::gaussian_matrix(&mut g, 2, 3);
        let p = FixedRankPoint::from_dense(&r2, 2).unwrap();
        assert!((p.dense() - &r2).norm() <= 1e-10 * r2.norm());

        assert!(matches!(
            FixedRankPoint::from_dense(&r2, 3),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn rejects_invalid_factors() {
        let u = DenseMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let z = DenseMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(
            FixedRankPoint::new(u, z),
            Err(Error::NotOrthonormal { .. })
        ));
        let u = DenseMatrix::identity(3, 2);
        let z = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            FixedRankPoint::new(u, z),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let e1 = e(2, 0);
        let e2 = e(2, 1);
        let p = FixedRankPoint::from_dense(&outer(&e1, &e1), 1).unwrap();

        let t = project_tangent(&p, &outer(&e2, &e2)).unwrap();
        assert_eq!(t.dense().norm(), 0.0);
        let n = project_normal(&p, &outer(&e2, &e2)).unwrap();
        assert_eq!(n.matrix(), &outer(&e2, &e2));

        let amb = outer(&e2, &e1);
        let t = project_tangent(&p, &amb).unwrap();
        assert!((t.dense() - &amb).norm() < 1e-15);
        assert!(project_normal(&p, &amb).unwrap().matrix().norm() < 1e-15);

        let t = project_tangent(&p, &p.dense()).unwrap();
        assert_eq!(t.xu().norm(), 0.0);
        assert_eq!(t.xz(), p.z());
    }

    #[test]
    fn tangent_projection_is_least_squares() {
        // Least-squares oracle: the tangent space is spanned by the dense images of
        // the horizontal coordinate basis; solve the normal equations directly.
        let p = random_point(21, 6, 4, 2);
        let mut g = rng::seeded(22);
        let amb = rng::gaussian_matrix(&mut g, 6, 4);
        let basis = tangent_basis(&p).unwrap();
        let cols: Vec<DenseMatrix> = basis.iter().map(|b| b.dense()).collect();
        let k = cols.len();
        let mut a = DenseMatrix::zeros(24, k);
        for (j, c) in cols.iter().enumerate() {
            a.set_column(j, &nalgebra::DVector::from_column_slice(c.as_slice()));
        }
        let b = nalgebra::DVector::from_column_slice(amb.as_slice());
        let coef = (a.transpose() * &a)
            .cholesky()
            .unwrap()
            .solve(&(a.transpose() * b));
        let fit = &a * coef;
        let t = project_tangent(&p, &amb).unwrap().dense();
        let fit = DenseMatrix::from_column_slice(6, 4, fit.as_slice());
        assert!((t - fit).norm() < 1e-12 * amb.norm());
    }

    #[test]
    fn decomposition_residual() {
        let p = random_point(1, 6, 4, 2);
        let amb = rng::gaussian_matrix(&mut rng::seeded(2), 6, 4);
        let t = project_tangent(&p, &amb).unwrap();
        let n = project_normal(&p, &amb).unwrap();
        assert!((t.dense() + n.matrix() - &amb).norm() <= 1e-10 * amb.norm());
        NormalVector::new(&p, n.into_matrix()).unwrap();
        TangentVector::new(&p, t.xu().clone(), t.xz().clone()).unwrap();
    }

    #[test]
    fn metric_examples() {
        let p = random_point(3, 5, 4, 2);
        let x = TangentVector::new(&p, DenseMatrix::zeros(5, 2), p.z().clone()).unwrap();
        let s: f64 = p.triplets().unwrap().sigma.iter().map(|s| s * s).sum();
        assert!((metric(&x, &x).unwrap() - s).abs() < 1e-12 * s);

        let mut g = rng::seeded(4);
        let a = random_tangent(&mut g, &p);
        let b = random_tangent(&mut g, &p);
        let dense = a.dense().dot(&b.dense());
        assert!((metric(&a, &b).unwrap() - dense).abs() < 1e-12 * a.norm() * b.norm());

        let q = random_point(4, 5, 4, 2);
        let c = random_tangent(&mut g, &q);
        assert!(matches!(metric(&a, &c), Err(Error::BaseMismatch)));
    }

    #[test]
    fn christoffel_examples() {
        let e1 = e(2, 0);
        let e2 = e(2, 1);
        let p = FixedRankPoint::from_dense(&(outer(&e1, &e1) * 2.0), 1).unwrap();
        let x = TangentVector::new(&p, e2.clone(), DenseMatrix::zeros(2, 1)).unwrap();
        assert_eq!(christoffel(&x, &x).unwrap().matrix().norm(), 0.0);
        let zero = TangentVector::zero(&p);
        assert_eq!(christoffel(&x, &zero).unwrap().matrix().norm(), 0.0);

        let q = random_point(5, 6, 5, 2);
        let mut g = rng::seeded(6);
        let a = random_tangent(&mut g, &q);
        let b = random_tangent(&mut g, &q);
        let ab = christoffel(&a, &b).unwrap();
        let ba = christoffel(&b, &a).unwrap();
        assert!((ab.matrix() - ba.matrix()).norm() < 1e-12 * ab.matrix().norm());
        NormalVector::new(&q, ab.into_matrix()).unwrap();
    }

    #[test]
    fn weingarten_worked_example() {
        let e1 = e(2, 0);
        let e2 = e(2, 1);
        let p = FixedRankPoint::from_dense(&(outer(&e1, &e1) * 2.0), 1).unwrap();
        let n = NormalVector::new(&p, outer(&e2, &e2)).unwrap();
        let x = project_tangent(&p, &outer(&e2, &e1)).unwrap();
        let lx = weingarten(&n, &x).unwrap();
        assert!((lx.dense() - outer(&e1, &e2) * 0.5).norm() < 1e-15);

        let zero = NormalVector::new(&p, DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(weingarten(&zero, &x).unwrap().dense().norm(), 0.0);
    }

    #[test]
    fn weingarten_matches_differentiated_projection() {
        // Directional derivative of P(s) = Pi_T at the moving point, applied to
        // the fixed normal N, equals the dense Weingarten image.
        let p = random_point(12, 6, 5, 2);
        let mut g = rng::seeded(13);
        let x = random_tangent(&mut g, &p);
        let n = project_normal(&p, &rng::gaussian_matrix(&mut g, 6, 5)).unwrap();
        let h = 1e-5;
        let at = |s: f64| {
            let q = FixedRankPoint::from_dense(&(p.dense() + x.dense() * s), 2).unwrap();
            project_tangent(&q, n.matrix()).unwrap().dense()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let lx = weingarten(&n, &x).unwrap().dense();
        assert!((fd - &lx).norm() < 1e-7 * lx.norm());
    }

    #[test]
    fn covariant_derivative_trivial_cases() {
        let p = random_point(7, 5, 4, 2);
        let zero = TangentVector::zero(&p);
        let z5 = DenseMatrix::zeros(5, 2);
        let z4 = DenseMatrix::zeros(4, 2);
        assert_eq!(
            covariant_derivative(&zero, &zero, &z5, &z4).unwrap().dense().norm(),
            0.0
        );

        let mut g = rng::seeded(8);
        let x = TangentVector::new(&p, z5.clone(), rng::gaussian_matrix(&mut g, 4, 2)).unwrap();
        let y = TangentVector::new(&p, z5.clone(), rng::gaussian_matrix(&mut g, 4, 2)).unwrap();
        let dyz = rng::gaussian_matrix(&mut g, 4, 2);
        let d = covariant_derivative(&x, &y, &z5, &dyz).unwrap();
        assert_eq!(d.xu().norm(), 0.0);
        assert_eq!(d.xz(), &dyz);
    }

    /// Curve through `p` with velocity `x`, staying on the manifold.
    fn curve(p: &FixedRankPoint, x: &TangentVector, s: f64) -> FixedRankPoint {
        let a = p.u() + x.xu() * s;
        let m = a.transpose() * &a;
        let (vals, vecs) = crate::linalg::symmetric_eigen(&m);
        let inv_sqrt = &vecs
            * DenseMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                vals.len(),
                vals.iter().map(|v| 1.0 / v.sqrt()),
            ))
            * vecs.transpose();
        FixedRankPoint::new(a * inv_sqrt, p.z() + x.xz() * s).unwrap()
    }

    #[test]
    fn covariant_derivative_matches_projected_ambient_derivative() {
        for seed in 0..20u64 {
            let p = random_point(100 + seed, 6, 5, 2);
            let mut g = rng::seeded(200 + seed);
            let x = random_tangent(&mut g, &p);
            let y0u = rng::gaussian_matrix(&mut g, 6, 2);
            let y0z = rng::gaussian_matrix(&mut g, 5, 2);
            let wu = rng::gaussian_matrix(&mut g, 6, 2);
            let wz = rng::gaussian_matrix(&mut g, 5, 2);
            // A smooth horizontal field along the curve.
            let field = |s: f64| {
                let q = curve(&p, &x, s);
                let yu = horizontal_part(q.u(), &y0u + &wu * s);
                let yz = &y0z + &wz * s;
                (q, yu, yz)
            };
            let h = 1e-5;
            let (qp, yup, yzp) = field(h);
            let (qm, yum, yzm) = field(-h);
            let (_, yu, yz) = field(0.0);
            let dyu = (yup - yum) / (2.0 * h);
            let dyz = (&yzp - &yzm) / (2.0 * h);
            let y = TangentVector::new(&p, yu.clone(), yz.clone()).unwrap();
            let nabla = covariant_derivative(&x, &y, &dyu, &dyz).unwrap();

            let dense_p = |q: &FixedRankPoint, yu: &DenseMatrix, yz: &DenseMatrix| {
                yu * q.z().transpose() + q.u() * yz.transpose()
            };
            let (_, yup, yzp) = field(h);
            let (_, yum, yzm) = field(-h);
            let d_dense = (dense_p(&qp, &yup, &yzp) - dense_p(&qm, &yum, &yzm)) / (2.0 * h);
            let oracle = project_tangent(&p, &d_dense).unwrap().dense();
            assert!(
                (nabla.dense() - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0),
                "seed {seed}: {}",
                (nabla.dense() - &oracle).norm()
            );
        }
    }

    #[test]
    fn gauge_fix_examples() {
        let p = random_point(30, 6, 4, 2);
        let q = gauge_fix(p.u(), p.z()).unwrap();
        assert!((q.dense() - p.dense()).norm() < 1e-14 * p.dense().norm());

        let q = gauge_fix(&(p.u() * (1.0 + 1e-6)), p.z()).unwrap();
        let expected = p.dense() * (1.0 + 1e-6);
        assert!((q.dense() - &expected).norm() < 1e-12 * expected.norm());
        assert!((q.u().transpose() * q.u() - DenseMatrix::identity(2, 2)).norm() < 1e-14);

        let mut g = rng::seeded(31);
        let drift = p.u() + rng::gaussian_matrix(&mut g, 6, 2) * 1e-3;
        let raw = &drift * p.z().transpose();
        let q = gauge_fix(&drift, p.z()).unwrap();
        assert!((q.dense() - &raw).norm() < 1e-12 * raw.norm());
        assert!((q.u().transpose() * q.u() - DenseMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn gauge_helper_preserves_dense_velocity() {
        let p = random_point(40, 6, 4, 2);
        let mut g = rng::seeded(41);
        let drift = p.u() + rng::gaussian_matrix(&mut g, 6, 2) * 1e-4;
        let amb = rng::gaussian_matrix(&mut g, 6, 4);
        let (du, dz) = eval_in_orthonormal_gauge(&drift, p.z(), |q| {
            Ok(project_tangent(q, &amb)?.into_parts())
        })
        .unwrap();
        let dense_vel = &du * p.z().transpose() + &drift * dz.transpose();
        let q = gauge_fix(&drift, p.z()).unwrap();
        let oracle = project_tangent(&q, &amb).unwrap().dense();
        assert!((dense_vel - oracle).norm() < 1e-12 * amb.norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projection_algebra(seed in 0u64..100_000) {
            let p = random_point(seed, 7, 5, 3);
            let mut g = rng::seeded(seed ^ 0xabc);
            let a = rng::gaussian_matrix(&mut g, 7, 5);
            let b = rng::gaussian_matrix(&mut g, 7, 5);
            let ta = project_tangent(&p, &a).unwrap();
            let tta = project_tangent(&p, &ta.dense()).unwrap();
            prop_assert!((ta.dense() - tta.dense()).norm() <= 1e-12 * a.norm());
            let tb = project_tangent(&p, &b).unwrap();
            let lhs = ta.dense().dot(&b);
            let rhs = a.dot(&tb.dense());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * a.norm() * b.norm());
        }
    }
}
