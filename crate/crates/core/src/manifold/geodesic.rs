//! Geodesics by classical RK4 on the first-order system in `(U, U', Z, Z')`:
//!
//! ```text
//! U'' = -U U'^T U' - 2 U' Z'^T Z (Z^T Z)^{-1}
//! Z'' =  Z U'^T U'
//! ```

use super::{gauge_fix, project_tangent, FixedRankPoint, TangentVector};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, DenseMatrix};
use crate::tolerances::Tolerances;

pub const DEFAULT_GEODESIC_STEPS: usize = 64;

#[derive(Debug, Clone)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: FixedRankPoint,
    /// Velocity at `point`; along a geodesic this is the parallel transport of
    /// the initial vector.
    pub velocity: TangentVector,
}

#[derive(Clone)]
struct State {
    u: DenseMatrix,
    du: DenseMatrix,
    z: DenseMatrix,
    dz: DenseMatrix,
}

impl State {
    fn axpy(&self, h: f64, k: &State) -> State {
        State {
            u: &self.u + &k.u * h,
            du: &self.du + &k.du * h,
            z: &self.z + &k.z * h,
            dz: &self.dz + &k.dz * h,
        }
    }
}

fn rhs(s: &State) -> Result<State> {
    let gram = s.z.transpose() * &s.z;
    let gram_inv = gram.clone().cholesky().ok_or(Error::GeodesicLeftManifold {
        t: f64::NAN,
        ratio: 0.0,
    })?;
    let vtv = s.du.transpose() * &s.du;
    let coupling = &s.dz.transpose() * &s.z;
    let acc_u = -(&s.u * &vtv) - (&s.du * gram_inv.solve(&coupling.transpose()).transpose()) * 2.0;
    let acc_z = &s.z * &vtv;
    Ok(State {
        u: s.du.clone(),
        du: acc_u,
        z: s.dz.clone(),
        dz: acc_z,
    })
}

fn rk4_step(s: &State, h: f64) -> Result<State> {
    let k1 = rhs(s)?;
    let k2 = rhs(&s.axpy(h / 2.0, &k1))?;
    let k3 = rhs(&s.axpy(h / 2.0, &k2))?;
    let k4 = rhs(&s.axpy(h, &k3))?;
    Ok(State {
        u: &s.u + (&k1.u + &k2.u * 2.0 + &k3.u * 2.0 + &k4.u) * (h / 6.0),
        du: &s.du + (&k1.du + &k2.du * 2.0 + &k3.du * 2.0 + &k4.du) * (h / 6.0),
        z: &s.z + (&k1.z + &k2.z * 2.0 + &k3.z * 2.0 + &k4.z) * (h / 6.0),
        dz: &s.dz + (&k1.dz + &k2.dz * 2.0 + &k3.dz * 2.0 + &k4.dz) * (h / 6.0),
    })
}

fn sample(s: &State, t: f64) -> Result<GeodesicSample> {
    let point = gauge_fix(&s.u, &s.z)?;
    let vel = &s.du * s.z.transpose() + &s.u * s.dz.transpose();
    let velocity = project_tangent(&point, &vel)?;
    Ok(GeodesicSample { t, point, velocity })
}

/// Samples of the geodesic with initial velocity `x` at `t = k / n_steps`,
/// `k = 0..=n_steps`.
pub fn geodesic_path(x: &TangentVector, n_steps: usize) -> Result<Vec<GeodesicSample>> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be positive".into()));
    }
    let base = x.base();
    let rank_tol = Tolerances::default().rank;
    let h = 1.0 / n_steps as f64;
    let mut s = State {
        u: base.u().clone(),
        du: x.xu().clone(),
        z: base.z().clone(),
        dz: x.xz().clone(),
    };
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(GeodesicSample {
        t: 0.0,
        point: base.clone(),
        velocity: x.clone(),
    });
    for k in 1..=n_steps {
        let t = k as f64 * h;
        s = rk4_step(&s, h).map_err(|e| match e {
            Error::GeodesicLeftManifold { ratio, .. } => Error::GeodesicLeftManifold { t, ratio },
            other => other,
        })?;
        // The scheme propagates U^T U' = 0 only approximately.
        let drift = s.u.transpose() * &s.du;
        s.du -= &s.u * drift;
        let sz = singular_values(&s.z)?;
        let ratio = sz[sz.len() - 1] / sz[0];
        if !(ratio > rank_tol) || !s.u.iter().all(|v| v.is_finite()) {
            return Err(Error::GeodesicLeftManifold { t, ratio });
        }
        out.push(sample(&s, t)?);
    }
    Ok(out)
}

/// Exponential map: the geodesic endpoint at `t = 1` and the transported
/// velocity there.
pub fn exp_map(x: &TangentVector, n_steps: usize) -> Result<(FixedRankPoint, TangentVector)> {
    if x.xu().norm() == 0.0 && x.xz().norm() == 0.0 {
        return Ok((x.base().clone(), x.clone()));
    }
    let mut path = geodesic_path(x, n_steps)?;
    let last = path.pop().expect("nonempty path");
    Ok((last.point, last.velocity))
}
