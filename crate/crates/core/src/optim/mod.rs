//! Minimization of `J(R) = |R - A|^2 / 2` over rank-`r` matrices.
//!
//! The covariant gradient is `Pi_T(R - A)` and the covariant Hessian is
//! `X -> X - L(N) X` with `N` the normal part of `A`, so at `Pi(A)` its
//! eigenvalues are `1 -+ sigma_{r+j} / sigma_i`.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{check_shape, solve_sylvester, symmetric_eigen, DenseMatrix};
use crate::manifold::{
    eval_in_orthonormal_gauge, exp_map, gauge_fix, metric, project_normal, project_tangent,
    FixedRankPoint, TangentVector,
};
use crate::projection::{time_grid, truncate};
use crate::rng;
use crate::trajectory::{Trajectory, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    Armijo { alpha0: f64, beta: f64, c: f64 },
}

impl StepRule {
    pub fn armijo() -> Self {
        StepRule::Armijo {
            alpha0: 1.0,
            beta: 0.5,
            c: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    Cg,
    Newton,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Method::Gd),
            "cg" => Ok(Method::Cg),
            "newton" => Ok(Method::Newton),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method {s:?} (expected gd, cg or newton)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub max_iters: usize,
    /// Stop when the metric norm of the gradient falls to this value.
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub method: Method,
    pub record_trace: bool,
    /// RK4 steps of the geodesic retraction.
    pub retraction_steps: usize,
    pub max_backtracks: usize,
    /// Seed of the saddle probes run when Newton converges.
    pub probe_seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-8,
            step_rule: StepRule::armijo(),
            method: Method::Gd,
            record_trace: true,
            retraction_steps: 16,
            max_backtracks: 60,
            probe_seed: 0,
        }
    }
}

impl OptimConfig {
    fn validate(&self) -> Result<()> {
        let ok = match self.step_rule {
            StepRule::Fixed(a) => a > 0.0,
            StepRule::Armijo { alpha0, beta, c } => {
                alpha0 > 0.0 && beta > 0.0 && beta < 1.0 && c > 0.0 && c < 1.0
            }
        };
        if !ok || !(self.grad_tol >= 0.0) || self.retraction_steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid optimizer configuration {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimStatus {
    Converged,
    MaxIters,
    Stalled,
    SaddleDetected,
}

impl fmt::Display for OptimStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimStatus::Converged => "converged",
            OptimStatus::MaxIters => "max_iters",
            OptimStatus::Stalled => "stalled",
            OptimStatus::SaddleDetected => "saddle_detected",
        })
    }
}

/// State at iterate `iter`; `step_size` is the step that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct OptimTrace {
    pub records: Vec<IterRecord>,
    pub status: OptimStatus,
    pub iterations: usize,
    /// Smallest Rayleigh quotient found by the saddle probes (Newton only).
    pub probe_min: Option<f64>,
}

pub const TRACE_CSV_HEADER: &str = "iter,J,grad_norm,step_size,status";

impl OptimTrace {
    /// The status column reads `running` except on the last row.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        let n = self.records.len();
        for (k, r) in self.records.iter().enumerate() {
            let status = if k + 1 == n {
                self.status.to_string()
            } else {
                "running".to_string()
            };
            writeln!(
                w,
                "{},{},{},{},{}",
                r.iter, r.j, r.grad_norm, r.step_size, status
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Init {
    Point(FixedRankPoint),
    Random(u64),
}

/// `|R - A|^2 / 2`.
pub fn distance_j(p: &FixedRankPoint, target: &DenseMatrix) -> Result<f64> {
    check_shape(target, p.shape())?;
    Ok(0.5 * (p.dense() - target).norm_squared())
}

pub fn grad_j(p: &FixedRankPoint, target: &DenseMatrix) -> Result<TangentVector> {
    check_shape(target, p.shape())?;
    project_tangent(p, &(p.dense() - target))
}

/// `(X_U - N X_Z (Z^T Z)^{-1}, X_Z - N^T X_U)`.
pub fn hess_j_apply(p: &FixedRankPoint, target: &DenseMatrix, x: &TangentVector) -> Result<TangentVector> {
    let n = project_normal(p, target)?;
    hess_with_normal(p, n.matrix(), x)
}

fn hess_with_normal(p: &FixedRankPoint, n: &DenseMatrix, x: &TangentVector) -> Result<TangentVector> {
    if !x.base().same_base(p) {
        return Err(Error::BaseMismatch);
    }
    let xu = x.xu() - n * x.xz() * p.gram_inv();
    let xz = x.xz() - n.transpose() * x.xu();
    Ok(TangentVector::raw(p, xu, xz))
}

/// Solves `Hess J[X] = -grad J` through the Sylvester equation
/// `X_U A - B B^T X_U = E - B F` with `A = Z^T Z`, `B = -N`,
/// `E = (I - U U^T) A_t Z`, `F = A_t^T U - Z`; then `X_Z = F - B^T X_U`.
pub fn newton_direction(p: &FixedRankPoint, target: &DenseMatrix) -> Result<TangentVector> {
    check_shape(target, p.shape())?;
    let n = project_normal(p, target)?.into_matrix();
    let b = -&n;
    let gram = p.z().transpose() * p.z();
    let tz = target * p.z();
    let e = &tz - p.u() * (p.u().transpose() * &tz);
    let f = target.transpose() * p.u() - p.z();
    let bbt = &b * b.transpose();
    let rhs = e - &b * &f;
    let xu = solve_sylvester(&gram, &bbt, &rhs)?;
    let xz = f - b.transpose() * &xu;
    Ok(TangentVector::raw(p, xu, xz))
}

/// Seeded start: `U` from QR of a Gaussian matrix, Gaussian `Z` scaled to
/// `|Z| = |A| / sqrt(r)`.
pub fn random_init(target: &DenseMatrix, r: usize, seed: u64) -> Result<FixedRankPoint> {
    let (l, m) = target.shape();
    if r == 0 || r > l.min(m) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in 1..={}",
            l.min(m)
        )));
    }
    let mut g = rng::seeded(seed);
    let u = rng::random_orthonormal(&mut g, l, r);
    let mut z = rng::gaussian_matrix(&mut g, m, r);
    let scale = target.norm() / (r as f64).sqrt();
    if scale > 0.0 {
        z *= scale / z.norm();
    }
    FixedRankPoint::new(u, z)
}

/// `J(q) - J(p)` evaluated from the change `D = q - p` so that small
/// decreases are not lost to cancellation: `<D, p - A> + |D|^2 / 2`.
fn j_change(p: &FixedRankPoint, q: &FixedRankPoint, residual: &DenseMatrix) -> f64 {
    let d = (q.u() - p.u()) * q.z().transpose() + p.u() * (q.z() - p.z()).transpose();
    d.dot(residual) + 0.5 * d.norm_squared()
}

/// Smallest Rayleigh quotient of the Hessian found by Lanczos runs from
/// `probes` random tangent vectors, together with whether it is negative.
fn probe_saddle(p: &FixedRankPoint, target: &DenseMatrix, probes: usize, seed: u64) -> Result<f64> {
    let n = project_normal(p, target)?.into_matrix();
    let mut g = rng::seeded(seed);
    let steps = p.dimension().min(80);
    let mut best = f64::INFINITY;
    for _ in 0..probes {
        let start = project_tangent(p, &rng::gaussian_matrix(&mut g, p.rows(), p.cols()))?;
        let mut basis: Vec<TangentVector> = vec![start.scale(1.0 / start.norm())];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for k in 0..steps {
            let q = &basis[k];
            let mut w = hess_with_normal(p, &n, q)?;
            let a = metric(q, &w)?;
            alpha.push(a);
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for b in &basis {
                    let c = metric(b, &w)?;
                    w = w.axpy(-c, b)?;
                }
            }
            let bn = w.norm();
            if k + 1 == steps || bn < 1e-12 {
                break;
            }
            beta.push(bn);
            basis.push(w.scale(1.0 / bn));
        }
        let kdim = alpha.len();
        let mut tri = DenseMatrix::zeros(kdim, kdim);
        for i in 0..kdim {
            tri[(i, i)] = alpha[i];
            if i + 1 < kdim {
                tri[(i, i + 1)] = beta[i];
                tri[(i + 1, i)] = beta[i];
            }
        }
        let (vals, vecs) = symmetric_eigen(&tri);
        // Ritz vector of the smallest Ritz value; its Rayleigh quotient is the certificate.
        let mut v = TangentVector::zero(p);
        for (i, b) in basis.iter().take(kdim).enumerate() {
            v = v.axpy(vecs[(i, 0)], b)?;
        }
        let hv = hess_with_normal(p, &n, &v)?;
        let rq = metric(&v, &hv)? / metric(&v, &v)?;
        let _ = vals;
        best = best.min(rq);
        if best < -1e-10 {
            break;
        }
    }
    Ok(best)
}

/// Runs gradient descent, conjugate gradient or Newton from `init`.
pub fn minimize(
    target: &DenseMatrix,
    r: usize,
    init: &Init,
    cfg: &OptimConfig,
) -> Result<(FixedRankPoint, OptimTrace)> {
    cfg.validate()?;
    let mut p = match init {
        Init::Point(p) => {
            check_shape(target, p.shape())?;
            if p.rank() != r {
                return Err(Error::InvalidArgument(format!(
                    "initial point has rank {}, expected {r}",
                    p.rank()
                )));
            }
            p.clone()
        }
        Init::Random(seed) => random_init(target, r, *seed)?,
    };

    let mut records = Vec::new();
    let mut j = distance_j(&p, target)?;
    let mut grad = grad_j(&p, target)?;
    let mut gnorm = grad.norm();
    let mut step_size = 0.0;
    let mut prev_dir: Option<TangentVector> = None;
    let mut prev_gnorm2 = 0.0;
    let mut since_restart = 0usize;
    let restart_every = target.nrows().min(target.ncols()) * r;
    let mut stalled = 0usize;
    let mut status = OptimStatus::MaxIters;
    let mut iter = 0usize;

    loop {
        if cfg.record_trace {
            records.push(IterRecord {
                iter,
                j,
                grad_norm: gnorm,
                step_size,
            });
        }
        if gnorm <= cfg.grad_tol {
            status = OptimStatus::Converged;
            break;
        }
        if iter >= cfg.max_iters {
            break;
        }

        let residual = p.dense() - target;
        let (dir, full_step) = match cfg.method {
            Method::Gd => (grad.scale(-1.0), false),
            Method::Cg => {
                let mut d = grad.scale(-1.0);
                if let Some(prev) = prev_dir.take() {
                    if since_restart < restart_every {
                        let moved = project_tangent(&p, &prev.dense())?;
                        let beta = gnorm * gnorm / prev_gnorm2;
                        let cand = d.axpy(beta, &moved)?;
                        if metric(&cand, &grad)? < 0.0 {
                            d = cand;
                            since_restart += 1;
                        } else {
                            since_restart = 0;
                        }
                    } else {
                        since_restart = 0;
                    }
                }
                (d, false)
            }
            Method::Newton => match newton_direction(&p, target) {
                Ok(d) => (d, true),
                Err(Error::NearSingularSylvester { .. }) => (grad.scale(-1.0), false),
                Err(e) => return Err(e),
            },
        };
        let slope = metric(&grad, &dir)?;

        let (next, alpha, dj) = match (full_step, cfg.step_rule) {
            (true, _) => {
                let (q, _) = exp_map(&dir, cfg.retraction_steps)?;
                let dj = j_change(&p, &q, &residual);
                (q, 1.0, dj)
            }
            (false, StepRule::Fixed(alpha)) => {
                let (q, _) = exp_map(&dir.scale(alpha), cfg.retraction_steps)?;
                let dj = j_change(&p, &q, &residual);
                (q, alpha, dj)
            }
            (false, StepRule::Armijo { alpha0, beta, c }) => {
                // Allowance for rounding in the evaluation of the change of J.
                let noise = 1e-14 * (1.0 + j);
                let mut alpha = alpha0;
                let mut accepted = None;
                for _ in 0..=cfg.max_backtracks {
                    match exp_map(&dir.scale(alpha), cfg.retraction_steps) {
                        Ok((q, _)) => {
                            let dj = j_change(&p, &q, &residual);
                            if dj <= c * alpha * slope + noise {
                                accepted = Some((q, alpha, dj));
                                break;
                            }
                        }
                        Err(Error::GeodesicLeftManifold { .. }) | Err(Error::RankDeficient { .. }) => {}
                        Err(e) => return Err(e),
                    }
                    alpha *= beta;
                }
                accepted.ok_or(Error::StepRuleFailure {
                    iter,
                    grad_norm: gnorm,
                })?
            }
        };

        if dj == 0.0 && (next.dense() - p.dense()).norm() == 0.0 {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev_gnorm2 = gnorm * gnorm;
        prev_dir = Some(dir.scale(alpha));
        p = next;
        j += dj;
        grad = grad_j(&p, target)?;
        gnorm = grad.norm();
        step_size = alpha;
        iter += 1;
        if stalled >= 3 {
            status = OptimStatus::Stalled;
            if cfg.record_trace {
                records.push(IterRecord {
                    iter,
                    j,
                    grad_norm: gnorm,
                    step_size,
                });
            }
            break;
        }
    }

    let mut probe_min = None;
    if cfg.method == Method::Newton && status == OptimStatus::Converged {
        let q = probe_saddle(&p, target, 10, cfg.probe_seed)?;
        probe_min = Some(q);
        if q < -1e-10 {
            status = OptimStatus::SaddleDetected;
        }
    }
    // Report the exactly evaluated J on the final record.
    if let Some(last) = records.last_mut() {
        last.j = distance_j(&p, target)?;
    }
    Ok((
        p,
        OptimTrace {
            records,
            status,
            iterations: iter,
            probe_min,
        },
    ))
}

/// RK4 integration of `U' = (I - U U^T) A Z (Z^T Z)^{-1}`, `Z' = A^T U - Z`,
/// i.e. the flow of `-grad J`, gauge-fixing every step.
pub fn gradient_flow(
    target: &DenseMatrix,
    r: usize,
    init: &FixedRankPoint,
    dt: f64,
    t1: f64,
) -> Result<Trajectory> {
    check_shape(target, init.shape())?;
    if init.rank() != r {
        return Err(Error::InvalidArgument(format!(
            "initial point has rank {}, expected {r}",
            init.rank()
        )));
    }
    let grid = time_grid(0.0, t1, dt)?;
    let oracle = truncate(target, r).ok().map(|(p, g)| (p.dense(), g));
    let sample = |t: f64, p: FixedRankPoint| {
        let dense = p.dense();
        TrajectorySample {
            t,
            residual_norm: (target - &dense).norm(),
            reconstruction_error: oracle
                .as_ref()
                .map_or(f64::NAN, |(o, _)| (dense - o).norm()),
            gap: oracle.as_ref().map(|(_, g)| *g),
            point: p,
        }
    };
    let field = |t: f64, u: &DenseMatrix, z: &DenseMatrix| {
        eval_in_orthonormal_gauge(u, z, |q| Ok(grad_j(q, target)?.scale(-1.0).into_parts())).map_err(
            |e| match e {
                Error::RankDeficient { sigma_r, sigma_1, .. } => Error::RankCollapse {
                    t,
                    ratio: sigma_r / sigma_1,
                },
                other => other,
            },
        )
    };

    let mut traj = Trajectory::default();
    traj.push(sample(0.0, init.clone()));
    let mut u = init.u().clone();
    let mut z = init.z().clone();
    for w in grid.windows(2) {
        let (t, tn) = (w[0], w[1]);
        let h = tn - t;
        let (k1u, k1z) = field(t, &u, &z)?;
        let (k2u, k2z) = field(t + h / 2.0, &(&u + &k1u * (h / 2.0)), &(&z + &k1z * (h / 2.0)))?;
        let (k3u, k3z) = field(t + h / 2.0, &(&u + &k2u * (h / 2.0)), &(&z + &k2z * (h / 2.0)))?;
        let (k4u, k4z) = field(tn, &(&u + &k3u * h), &(&z + &k3z * h))?;
        let un = &u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        let zn = &z + (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
        let p = gauge_fix(&un, &zn).map_err(|e| match e {
            Error::RankDeficient { sigma_r, sigma_1, .. } => Error::RankCollapse {
                t: tn,
                ratio: sigma_r / sigma_1,
            },
            other => other,
        })?;
        u = p.u().clone();
        z = p.z().clone();
        traj.push(sample(tn, p));
    }
    Ok(traj)
}
