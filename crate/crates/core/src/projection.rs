//! The truncated SVD as the orthogonal projection onto the rank-`r`
//! manifold, its differential, and the best rank-`r` tracking equations.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{check_shape, svd, DenseMatrix, Svd};
use crate::manifold::{
    eval_in_orthonormal_gauge, gauge_fix, project_normal, project_tangent, FixedRankPoint,
    TangentVector,
};
use crate::tolerances::Tolerances;
use crate::trajectory::{Trajectory, TrajectorySample};

/// Spectral gap at rank `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub sigma_r: f64,
    pub sigma_r_plus_1: f64,
    /// `(sigma_r - sigma_{r+1}) / sigma_1`, zero when `sigma_1 = 0`.
    pub relative_gap: f64,
}

impl GapReport {
    pub fn from_spectrum(sigma: &[f64], r: usize) -> Self {
        let s1 = sigma.first().copied().unwrap_or(0.0);
        let sr = sigma.get(r - 1).copied().unwrap_or(0.0);
        let sr1 = sigma.get(r).copied().unwrap_or(0.0);
        let relative_gap = if s1 > 0.0 { (sr - sr1) / s1 } else { 0.0 };
        Self {
            sigma_r: sr,
            sigma_r_plus_1: sr1,
            relative_gap,
        }
    }

    /// The line `sigma_r sigma_r1 relative_gap`.
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {}",
            self.sigma_r, self.sigma_r_plus_1, self.relative_gap
        )
    }
}

impl fmt::Display for GapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sigma_r = {:e}, sigma_r+1 = {:e}, relative gap = {:e}",
            self.sigma_r, self.sigma_r_plus_1, self.relative_gap
        )
    }
}

fn check_rank(amb: &DenseMatrix, r: usize) -> Result<()> {
    let p = amb.nrows().min(amb.ncols());
    if r == 0 || r > p {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in 1..={p}"
        )));
    }
    Ok(())
}

/// SVD with the rank and gap preconditions of the projection checked.
fn gapped_svd(amb: &DenseMatrix, r: usize, tol: &Tolerances) -> Result<(Svd, GapReport)> {
    check_rank(amb, r)?;
    let f = svd(amb)?;
    let gap = GapReport::from_spectrum(&f.sigma, r);
    if !(f.sigma[r - 1] > tol.rank * f.sigma[0]) {
        return Err(Error::RankDeficient {
            rank: r,
            sigma_r: f.sigma[r - 1],
            sigma_1: f.sigma[0],
        });
    }
    if !(gap.relative_gap > tol.gap) {
        return Err(Error::SkeletonProximity { gap });
    }
    Ok((f, gap))
}

fn point_from_svd(f: &Svd, r: usize, tol: &Tolerances) -> Result<FixedRankPoint> {
    let u = f.u.columns(0, r).into_owned();
    let mut z = f.v.columns(0, r).into_owned();
    for k in 0..r {
        z.column_mut(k).scale_mut(f.sigma[k]);
    }
    FixedRankPoint::new_with(u, z, tol)
}

/// Best rank-`r` approximation `sum_{i<=r} sigma_i u_i v_i^T`.
pub fn truncate(amb: &DenseMatrix, r: usize) -> Result<(FixedRankPoint, GapReport)> {
    truncate_with(amb, r, &Tolerances::default())
}

pub fn truncate_with(
    amb: &DenseMatrix,
    r: usize,
    tol: &Tolerances,
) -> Result<(FixedRankPoint, GapReport)> {
    let (f, gap) = gapped_svd(amb, r, tol)?;
    Ok((point_from_svd(&f, r, tol)?, gap))
}

/// Curvature correction `sum_{i,j} c_ij [...]` of the differential, with
/// `c_ij = sigma_{r+j} / (sigma_i^2 - sigma_{r+j}^2)`.
fn curvature_correction(f: &Svd, r: usize, dir: &DenseMatrix, tol: &Tolerances) -> DenseMatrix {
    let p = f.sigma.len();
    let cutoff = tol.triplet_cutoff * f.sigma[0];
    let k = (r..p).take_while(|&j| f.sigma[j] > cutoff).count();
    let mut c = DenseMatrix::zeros(dir.nrows(), dir.ncols());
    if k == 0 {
        return c;
    }
    let uk = f.u.columns(0, r + k);
    let vk = f.v.columns(0, r + k);
    let proj = uk.transpose() * dir * vk;
    // Coefficient matrices in the singular bases: c = U_k M V_k^T.
    let mut m = DenseMatrix::zeros(r + k, r + k);
    for i in 0..r {
        let si = f.sigma[i];
        for j in r..r + k {
            let sj = f.sigma[j];
            let cij = sj / ((si - sj) * (si + sj));
            let a = proj[(j, i)];
            let b = proj[(i, j)];
            m[(j, i)] += cij * (sj * a + si * b);
            m[(i, j)] += cij * (si * a + sj * b);
        }
    }
    c += &uk * m * vk.transpose();
    c
}

/// Directional derivative of the truncated SVD at `amb` along `dir`.
pub fn differential(amb: &DenseMatrix, r: usize, dir: &DenseMatrix) -> Result<TangentVector> {
    differential_with(amb, r, dir, &Tolerances::default())
}

pub fn differential_with(
    amb: &DenseMatrix,
    r: usize,
    dir: &DenseMatrix,
    tol: &Tolerances,
) -> Result<TangentVector> {
    check_shape(dir, amb.shape())?;
    let (f, _) = gapped_svd(amb, r, tol)?;
    let point = point_from_svd(&f, r, tol)?;
    let c = curvature_correction(&f, r, dir, tol);
    project_tangent(&point, &(dir + c))
}

/// `sigma_{r+1} / (sigma_r - sigma_{r+1}) |dir|`, an upper bound on
/// `|differential(amb, r, dir) - Pi_T(dir)|`.
pub fn deviation_bound(amb: &DenseMatrix, r: usize, dir: &DenseMatrix) -> Result<f64> {
    check_shape(dir, amb.shape())?;
    let (_, gap) = gapped_svd(amb, r, &Tolerances::default())?;
    Ok(gap.sigma_r_plus_1 / (gap.sigma_r - gap.sigma_r_plus_1) * dir.norm())
}

/// A point together with the singular triplets of the normal residual.
#[derive(Debug, Clone)]
pub struct TrackedFactors {
    pub point: FixedRankPoint,
    /// `sigma_{r+j}`, descending.
    pub normal_sigma: Vec<f64>,
    /// Columns `u_{r+j}`.
    pub normal_u: DenseMatrix,
    /// Columns `v_{r+j}`.
    pub normal_v: DenseMatrix,
}

impl TrackedFactors {
    /// Triplets of the normal part of `amb` at `point`; those below the
    /// triplet cutoff are dropped.
    pub fn from_ambient(point: &FixedRankPoint, amb: &DenseMatrix) -> Result<Self> {
        let tol = Tolerances::default();
        let n = project_normal(point, amb)?;
        let f = svd(n.matrix())?;
        let scale = amb.norm();
        let k = f
            .sigma
            .iter()
            .take(amb.nrows().min(amb.ncols()) - point.rank())
            .take_while(|&&s| s > tol.triplet_cutoff * scale)
            .count();
        Ok(Self {
            point: point.clone(),
            normal_sigma: f.sigma[..k].to_vec(),
            normal_u: f.u.columns(0, k).into_owned(),
            normal_v: f.v.columns(0, k).into_owned(),
        })
    }

    pub fn new(
        point: FixedRankPoint,
        normal_sigma: Vec<f64>,
        normal_u: DenseMatrix,
        normal_v: DenseMatrix,
    ) -> Result<Self> {
        let k = normal_sigma.len();
        check_shape(&normal_u, (point.rows(), k))?;
        check_shape(&normal_v, (point.cols(), k))?;
        let tol = Tolerances::default();
        let tri = point.triplets()?;
        let dev = (point.u().transpose() * &normal_u)
            .norm()
            .max((tri.right.transpose() * &normal_v).norm());
        if dev > tol.orthonormality {
            return Err(Error::InvalidArgument(format!(
                "normal triplets not orthogonal to the point's singular vectors ({dev:e})"
            )));
        }
        if normal_sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "normal singular values must be descending".into(),
            ));
        }
        if let (Some(&first), Some(&smallest)) = (normal_sigma.first(), tri.sigma.last()) {
            if first >= smallest {
                return Err(Error::SkeletonProximity {
                    gap: GapReport {
                        sigma_r: smallest,
                        sigma_r_plus_1: first,
                        relative_gap: (smallest - first) / tri.sigma[0],
                    },
                });
            }
        }
        Ok(Self {
            point,
            normal_sigma,
            normal_u,
            normal_v,
        })
    }
}

/// Right-hand side `(dU, dZ)` of the best rank-`r` tracking system for an
/// ambient velocity `amb_dot`.
pub fn best_rank_rhs(
    tracked: &TrackedFactors,
    amb_dot: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let p = &tracked.point;
    check_shape(amb_dot, p.shape())?;
    let tri = p.triplets()?;
    let r = p.rank();
    let k = tracked.normal_sigma.len();
    let mut corr = DenseMatrix::zeros(p.rows(), p.cols());
    if k > 0 {
        // a_ij = u_{r+j}^T D v_i, b_ij = u_i^T D v_{r+j}
        let a = tracked.normal_u.transpose() * amb_dot * &tri.right;
        let b = tri.left.transpose() * amb_dot * &tracked.normal_v;
        let mut m_left = DenseMatrix::zeros(k, r);
        let mut m_right = DenseMatrix::zeros(r, k);
        for i in 0..r {
            let si = tri.sigma[i];
            for j in 0..k {
                let sj = tracked.normal_sigma[j];
                if !(si > sj) {
                    return Err(Error::SkeletonProximity {
                        gap: GapReport {
                            sigma_r: si,
                            sigma_r_plus_1: sj,
                            relative_gap: (si - sj) / tri.sigma[0],
                        },
                    });
                }
                let c = sj / ((si - sj) * (si + sj));
                m_left[(j, i)] = c * (sj * a[(j, i)] + si * b[(i, j)]);
                m_right[(i, j)] = c * (si * a[(j, i)] + sj * b[(i, j)]);
            }
        }
        corr += &tracked.normal_u * m_left * tri.right.transpose();
        corr += &tri.left * m_right * tracked.normal_v.transpose();
    }
    Ok(project_tangent(p, &(amb_dot + corr))?.into_parts())
}

/// Uniform time grid `t0 + k dt`, with the last step clipped to `t1`.
pub(crate) fn time_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t1 > t0) || !(dt > 0.0) || !(dt <= t1 - t0 + 1e-15 * t1.abs().max(1.0)) {
        return Err(Error::InvalidArgument(format!(
            "need t1 > t0 and 0 < dt <= t1 - t0 (t0 = {t0}, t1 = {t1}, dt = {dt})"
        )));
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    grid.push(t1);
    Ok(grid)
}

/// Integrates the tracking system with RK4 from `truncate(amb(t0), r)`,
/// gauge-fixing every step.
///
/// Each sample records the gap of `amb(t)`, the residual `|amb - R|` and the
/// distance to a fresh truncation of `amb(t)`. A gap collapse ends the run
/// with [`Error::SkeletonCrossing`].
pub fn track_best_rank<F>(path: F, t0: f64, t1: f64, dt: f64, r: usize) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<(DenseMatrix, DenseMatrix)>,
{
    let tol = Tolerances::default();
    let grid = time_grid(t0, t1, dt)?;
    let crossing = |t: f64, e: Error| match e {
        Error::SkeletonProximity { gap } => Error::SkeletonCrossing { t, gap },
        other => other,
    };

    let (a0, _) = path(t0)?;
    let (p0, gap0) = truncate_with(&a0, r, &tol).map_err(|e| crossing(t0, e))?;
    let mut traj = Trajectory::default();
    traj.push(TrajectorySample {
        t: t0,
        point: p0.clone(),
        gap: Some(gap0),
        residual_norm: (&a0 - p0.dense()).norm(),
        reconstruction_error: 0.0,
    });

    let field = |t: f64, u: &DenseMatrix, z: &DenseMatrix| {
        let (amb, amb_dot) = path(t)?;
        eval_in_orthonormal_gauge(u, z, |q| {
            let tracked = TrackedFactors::from_ambient(q, &amb)?;
            best_rank_rhs(&tracked, &amb_dot)
        })
        .map_err(|e| crossing(t, e))
    };

    let mut u = p0.u().clone();
    let mut z = p0.z().clone();
    for w in grid.windows(2) {
        let (t, tn) = (w[0], w[1]);
        let h = tn - t;
        let (k1u, k1z) = field(t, &u, &z)?;
        let (k2u, k2z) = field(t + h / 2.0, &(&u + &k1u * (h / 2.0)), &(&z + &k1z * (h / 2.0)))?;
        let (k3u, k3z) = field(t + h / 2.0, &(&u + &k2u * (h / 2.0)), &(&z + &k2z * (h / 2.0)))?;
        let (k4u, k4z) = field(tn, &(&u + &k3u * h), &(&z + &k3z * h))?;
        let un = &u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        let zn = &z + (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
        let p = gauge_fix(&un, &zn)?;

        let (amb, _) = path(tn)?;
        let (oracle, gap) = truncate_with(&amb, r, &tol).map_err(|e| crossing(tn, e))?;
        let dense = p.dense();
        traj.push(TrajectorySample {
            t: tn,
            point: p.clone(),
            gap: Some(gap),
            residual_norm: (&amb - &dense).norm(),
            reconstruction_error: (dense - oracle.dense()).norm(),
        });
        u = p.u().clone();
        z = p.z().clone();
    }
    Ok(traj)
}
