//! A-posteriori bound on the DO error in terms of the best-approximation error:
//!
//! ```text
//! |R(t) - Pi(X(t))| <= int_0^t |X - Pi(X)| (K + |f(s, X)| / (sigma_r - sigma_{r+1})) e^{eta (t - s)} ds
//! eta = K + sup_s 2 |f(s, X)| / sigma_r(X)
//! ```
//!
//! where `X` is the full-space solution. The integral is evaluated by the
//! trapezoidal rule on the sample grid and the supremum is taken over the
//! samples.

use std::io::Write;

use super::VectorField;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::manifold::{project_tangent, FixedRankPoint};
use crate::projection::{truncate, GapReport};
use crate::rng;
use crate::trajectory::Trajectory;

pub const ERROR_REPORT_CSV_HEADER: &str = "t,do_error,best_error,bound";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzConstant {
    /// Declared by the field or the caller.
    Certified(f64),
    /// Sampled along the trajectories; not a guarantee.
    Estimated(f64),
}

impl LipschitzConstant {
    pub fn value(&self) -> f64 {
        match *self {
            LipschitzConstant::Certified(k) | LipschitzConstant::Estimated(k) => k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ErrorBoundReport {
    pub times: Vec<f64>,
    /// `|R(t) - Pi(X(t))|`
    pub do_error: Vec<f64>,
    /// `|X(t) - Pi(X(t))|`
    pub best_error: Vec<f64>,
    pub bound: Vec<f64>,
    pub eta: f64,
    pub lipschitz: LipschitzConstant,
    /// First sample where the reference reached the skeleton; the lists stop
    /// just before it.
    pub crossing: Option<(f64, GapReport)>,
    /// `max(do_error - bound)` over the samples.
    pub max_excess: f64,
    /// `do_error <= bound + 1e-6 (1 + bound)` at every sample.
    pub holds: bool,
}

/// Largest ratio `|f(t, A) - f(t, B)| / |A - B|` over the DO/reference pairs
/// and consecutive reference samples.
pub fn estimate_lipschitz(
    do_traj: &Trajectory,
    ref_traj: &[(f64, DenseMatrix)],
    f: &dyn VectorField,
) -> Result<f64> {
    let mut k = 0.0f64;
    let mut ratio = |t: f64, a: &DenseMatrix, b: &DenseMatrix| -> Result<()> {
        let d = (a - b).norm();
        if d > 0.0 {
            let df = (f.eval(t, a)? - f.eval(t, b)?).norm();
            k = k.max(df / d);
        }
        Ok(())
    };
    for (s, (t, x)) in do_traj.samples.iter().zip(ref_traj) {
        ratio(*t, x, &s.point.dense())?;
    }
    for w in ref_traj.windows(2) {
        ratio(w[0].0, &w[0].1, &w[1].1)?;
    }
    Ok(k)
}

pub fn evaluate_error_bound(
    do_traj: &Trajectory,
    ref_traj: &[(f64, DenseMatrix)],
    f: &dyn VectorField,
    k: Option<f64>,
) -> Result<ErrorBoundReport> {
    if do_traj.samples.len() != ref_traj.len() {
        return Err(Error::InvalidArgument(format!(
            "time grids differ in length ({} vs {})",
            do_traj.samples.len(),
            ref_traj.len()
        )));
    }
    for (s, (t, _)) in do_traj.samples.iter().zip(ref_traj) {
        if (s.t - t).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "time grids differ ({} vs {t})",
                s.t
            )));
        }
    }
    let lipschitz = match k.or_else(|| f.lipschitz()) {
        Some(k) => LipschitzConstant::Certified(k),
        None => LipschitzConstant::Estimated(estimate_lipschitz(do_traj, ref_traj, f)?),
    };
    let kk = lipschitz.value();

    let mut times = Vec::new();
    let mut do_error = Vec::new();
    let mut best_error = Vec::new();
    let mut weight = Vec::new();
    let mut eta_sup = 0.0f64;
    let mut crossing = None;
    for (s, (t, x)) in do_traj.samples.iter().zip(ref_traj) {
        let r = s.point.rank();
        let (best, gap) = match truncate(x, r) {
            Ok(v) => v,
            Err(Error::SkeletonProximity { gap }) => {
                crossing = Some((*t, gap));
                break;
            }
            Err(Error::RankDeficient { sigma_r, .. }) => {
                crossing = Some((*t, GapReport::from_spectrum(&[sigma_r, sigma_r], 1)));
                break;
            }
            Err(e) => return Err(e),
        };
        let best_dense = best.dense();
        let lnorm = f.eval(*t, x)?.norm();
        times.push(*t);
        do_error.push((s.point.dense() - &best_dense).norm());
        let be = (x - &best_dense).norm();
        best_error.push(be);
        weight.push(be * (kk + lnorm / (gap.sigma_r - gap.sigma_r_plus_1)));
        eta_sup = eta_sup.max(2.0 * lnorm / gap.sigma_r);
    }
    let eta = kk + eta_sup;

    let mut bound = Vec::with_capacity(times.len());
    if !times.is_empty() {
        bound.push(0.0);
    }
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let decay = (eta * h).exp();
        let prev = bound[i - 1];
        bound.push(decay * prev + 0.5 * h * (weight[i - 1] * decay + weight[i]));
    }

    let mut max_excess = f64::NEG_INFINITY;
    let mut holds = true;
    for (e, b) in do_error.iter().zip(&bound) {
        max_excess = max_excess.max(e - b);
        if *e > b + 1e-6 * (1.0 + b) {
            holds = false;
        }
    }
    Ok(ErrorBoundReport {
        times,
        do_error,
        best_error,
        bound,
        eta,
        lipschitz,
        crossing,
        max_excess,
        holds,
    })
}

pub fn error_report_csv<W: Write>(report: &ErrorBoundReport, w: &mut W) -> Result<()> {
    writeln!(w, "{ERROR_REPORT_CSV_HEADER}")?;
    for i in 0..report.times.len() {
        writeln!(
            w,
            "{},{},{},{}",
            report.times[i], report.do_error[i], report.best_error[i], report.bound[i]
        )?;
    }
    Ok(())
}

/// Power-iteration estimate of the operator norm of `Pi_T(p1) - Pi_T(p2)`
/// acting on ambient matrices. The estimate is a lower bound that converges
/// to the norm.
pub fn projector_distance(
    p1: &FixedRankPoint,
    p2: &FixedRankPoint,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut x = rng::gaussian_matrix(&mut rng::seeded(seed), p1.rows(), p1.cols());
    x /= x.norm();
    let mut best = 0.0f64;
    for _ in 0..iters {
        let y = project_tangent(p1, &x)?.dense() - project_tangent(p2, &x)?.dense();
        let n = y.norm();
        best = best.max(n);
        if n == 0.0 {
            break;
        }
        x = y / n;
    }
    Ok(best)
}
