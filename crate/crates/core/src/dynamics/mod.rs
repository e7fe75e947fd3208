//! Dynamically orthogonal (DO) integration of matrix ODEs `dR/dt = f(t, R)`.
//!
//! The DO system is `U' = (I - U U^T) L Z (Z^T Z)^{-1}`, `Z' = L^T U` with
//! `L = f(t, U Z^T)`, i.e. the tangent projection of the full vector field.
//! It is integrated either directly on the factors or by the projected scheme
//! `R_{n+1} = Pi(R_n + dt Lbar(t_n, R_n, dt))`.

mod bound;
mod fields;

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{check_shape, DenseMatrix};
use crate::manifold::{eval_in_orthonormal_gauge, gauge_fix, project_tangent, FixedRankPoint, TangentVector};
use crate::projection::{time_grid, truncate};
use crate::trajectory::{Trajectory, TrajectorySample};

pub use bound::{
    error_report_csv, estimate_lipschitz, evaluate_error_bound, projector_distance,
    ErrorBoundReport, LipschitzConstant, ERROR_REPORT_CSV_HEADER,
};
pub use fields::{BuiltinField, FnField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    /// Second-order Runge-Kutta, midpoint form.
    HeunRk2,
    Rk4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::HeunRk2 => "heun_rk2",
            Scheme::Rk4 => "rk4",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "heun_rk2" => Ok(Scheme::HeunRk2),
            "rk4" => Ok(Scheme::Rk4),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scheme {s:?} (expected euler, heun_rk2 or rk4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FactorOde,
    ProjectedStep,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::FactorOde => "factor_ode",
            Mode::ProjectedStep => "projected_step",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "factor_ode" => Ok(Mode::FactorOde),
            "projected_step" => Ok(Mode::ProjectedStep),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode {s:?} (expected factor_ode or projected_step)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoRunConfig {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub mode: Mode,
    /// Gauge-fix the factors every this many steps (factor mode).
    pub gauge_every: usize,
    /// Record every this many steps; the final step is always recorded.
    pub record_stride: usize,
}

impl Default for DoRunConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: 1.0,
            dt: 1e-2,
            scheme: Scheme::Rk4,
            mode: Mode::FactorOde,
            gauge_every: 1,
            record_stride: 1,
        }
    }
}

impl DoRunConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.gauge_every == 0 || self.record_stride == 0 {
            return Err(Error::InvalidArgument(
                "gauge_every and record_stride must be positive".into(),
            ));
        }
        time_grid(self.t0, self.t1, self.dt)
    }

    fn records(&self, step: usize, n_steps: usize) -> bool {
        step % self.record_stride == 0 || step == n_steps
    }
}

/// DO velocity `Pi_T f(t, U Z^T)` at `p`.
pub fn do_rhs(p: &FixedRankPoint, t: f64, f: &dyn VectorField) -> Result<TangentVector> {
    let l = f.eval(t, &p.dense())?;
    check_shape(&l, p.shape())?;
    project_tangent(p, &l)
}

/// One step of the increment function `Lbar(t, R, dt)` of a dense scheme.
fn dense_increment(f: &dyn VectorField, scheme: Scheme, t: f64, r: &DenseMatrix, h: f64) -> Result<DenseMatrix> {
    let k1 = f.eval(t, r)?;
    match scheme {
        Scheme::Euler => Ok(k1),
        Scheme::HeunRk2 => f.eval(t + h / 2.0, &(r + &k1 * (h / 2.0))),
        Scheme::Rk4 => {
            let k2 = f.eval(t + h / 2.0, &(r + &k1 * (h / 2.0)))?;
            let k3 = f.eval(t + h / 2.0, &(r + &k2 * (h / 2.0)))?;
            let k4 = f.eval(t + h, &(r + &k3 * h))?;
            Ok((k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0)
        }
    }
}

fn rank_collapse(t: f64, e: Error) -> Error {
    match e {
        Error::RankDeficient { sigma_r, sigma_1, .. } => Error::RankCollapse {
            t,
            ratio: sigma_r / sigma_1,
        },
        other => other,
    }
}

fn factor_step(
    f: &dyn VectorField,
    scheme: Scheme,
    t: f64,
    u: &DenseMatrix,
    z: &DenseMatrix,
    h: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let rhs = |t: f64, u: &DenseMatrix, z: &DenseMatrix| {
        eval_in_orthonormal_gauge(u, z, |p| Ok(do_rhs(p, t, f)?.into_parts()))
            .map_err(|e| rank_collapse(t, e))
    };
    let (k1u, k1z) = rhs(t, u, z)?;
    match scheme {
        Scheme::Euler => Ok((u + k1u * h, z + k1z * h)),
        Scheme::HeunRk2 => {
            let (k2u, k2z) = rhs(t + h / 2.0, &(u + &k1u * (h / 2.0)), &(z + &k1z * (h / 2.0)))?;
            Ok((u + k2u * h, z + k2z * h))
        }
        Scheme::Rk4 => {
            let (k2u, k2z) = rhs(t + h / 2.0, &(u + &k1u * (h / 2.0)), &(z + &k1z * (h / 2.0)))?;
            let (k3u, k3z) = rhs(t + h / 2.0, &(u + &k2u * (h / 2.0)), &(z + &k2z * (h / 2.0)))?;
            let (k4u, k4z) = rhs(t + h, &(u + &k3u * h), &(z + &k3z * h))?;
            Ok((
                u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0),
                z + (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0),
            ))
        }
    }
}

fn plain_sample(t: f64, point: FixedRankPoint) -> TrajectorySample {
    TrajectorySample {
        t,
        point,
        gap: None,
        residual_norm: f64::NAN,
        reconstruction_error: f64::NAN,
    }
}

/// Integrates the DO system from `p0`, returning whatever was computed
/// together with the error that stopped the run, if any.
///
/// A skeleton crossing in projected mode sets [`Trajectory::crossing`].
pub fn integrate_do_partial(
    p0: &FixedRankPoint,
    f: &dyn VectorField,
    cfg: &DoRunConfig,
) -> (Trajectory, Option<Error>) {
    let mut traj = Trajectory::default();
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return (traj, Some(e)),
    };
    traj.push(plain_sample(cfg.t0, p0.clone()));
    let n_steps = grid.len() - 1;
    let r = p0.rank();

    match cfg.mode {
        Mode::FactorOde => {
            let mut u = p0.u().clone();
            let mut z = p0.z().clone();
            for (k, w) in grid.windows(2).enumerate() {
                let (t, tn) = (w[0], w[1]);
                let step = k + 1;
                let (un, zn) = match factor_step(f, cfg.scheme, t, &u, &z, tn - t) {
                    Ok(v) => v,
                    Err(e) => return (traj, Some(e)),
                };
                let fixed = match gauge_fix(&un, &zn) {
                    Ok(p) => p,
                    Err(e) => return (traj, Some(rank_collapse(tn, e))),
                };
                if step % cfg.gauge_every == 0 {
                    u = fixed.u().clone();
                    z = fixed.z().clone();
                } else {
                    u = un;
                    z = zn;
                }
                if cfg.records(step, n_steps) {
                    traj.push(plain_sample(tn, fixed));
                }
            }
        }
        Mode::ProjectedStep => {
            let mut dense = p0.dense();
            for (k, w) in grid.windows(2).enumerate() {
                let (t, tn) = (w[0], w[1]);
                let step = k + 1;
                let inc = match dense_increment(f, cfg.scheme, t, &dense, tn - t) {
                    Ok(v) => v,
                    Err(e) => return (traj, Some(e)),
                };
                let pre = &dense + inc * (tn - t);
                let (p, gap) = match truncate(&pre, r) {
                    Ok(v) => v,
                    Err(Error::SkeletonProximity { gap }) => {
                        traj.crossing = Some((tn, gap));
                        return (traj, Some(Error::SkeletonCrossing { t: tn, gap }));
                    }
                    Err(e) => return (traj, Some(rank_collapse(tn, e))),
                };
                dense = p.dense();
                if cfg.records(step, n_steps) {
                    traj.push(TrajectorySample {
                        t: tn,
                        residual_norm: (&pre - &dense).norm(),
                        point: p,
                        gap: Some(gap),
                        reconstruction_error: f64::NAN,
                    });
                }
            }
        }
    }
    (traj, None)
}

pub fn integrate_do(p0: &FixedRankPoint, f: &dyn VectorField, cfg: &DoRunConfig) -> Result<Trajectory> {
    match integrate_do_partial(p0, f, cfg) {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// Full-space RK4 reference on the recorded grid of `cfg`.
pub fn dense_reference(
    r0: &DenseMatrix,
    f: &dyn VectorField,
    cfg: &DoRunConfig,
) -> Result<Vec<(f64, DenseMatrix)>> {
    let grid = cfg.grid()?;
    let n_steps = grid.len() - 1;
    let mut r = r0.clone();
    let mut out = vec![(cfg.t0, r.clone())];
    for (k, w) in grid.windows(2).enumerate() {
        let (t, tn) = (w[0], w[1]);
        let inc = dense_increment(f, Scheme::Rk4, t, &r, tn - t)?;
        r += inc * (tn - t);
        let norm = r.norm();
        if !norm.is_finite() || norm > 1e150 {
            return Err(Error::Divergence { t: tn });
        }
        if cfg.records(k + 1, n_steps) {
            out.push((tn, r.clone()));
        }
    }
    Ok(out)
}
