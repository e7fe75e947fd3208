use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lowrank::dynamics::{
    dense_reference, error_report_csv, evaluate_error_bound, integrate_do_partial, BuiltinField,
    LipschitzConstant,
};
use lowrank::io::{self, MatrixFormat};
use lowrank::manifold::{
    curvature_spectrum_with, geodesic_path, project_normal, project_tangent, weingarten, NormalVector,
};
use lowrank::optim::{minimize, Init, Method, OptimConfig, StepRule};
use lowrank::projection::{deviation_bound, differential_with, track_best_rank, truncate_with, GapReport};
use lowrank::{DenseMatrix, Error, FixedRankPoint, Tolerances, Trajectory};

use crate::descriptor::Descriptor;
use crate::failure::{CliResult, Failure, WithPath, EXIT_SKELETON};

pub struct Global {
    pub seed: u64,
    pub tol: Tolerances,
    pub format: MatrixFormat,
    pub out_dir: PathBuf,
}

impl Global {
    /// `explicit` if given, else `default` inside the output directory.
    pub fn output(&self, explicit: Option<PathBuf>, default: &str) -> PathBuf {
        explicit.unwrap_or_else(|| self.out_dir.join(default))
    }

    pub fn matrix_ext(&self) -> &'static str {
        match self.format {
            MatrixFormat::Text => "txt",
            MatrixFormat::Binary => "bin",
        }
    }

    pub fn ensure_out_dir(&self) -> CliResult {
        fs::create_dir_all(&self.out_dir).at(&self.out_dir)
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).at(dir)?;
        }
    }
    fs::write(path, text).at(path)
}

pub fn write_with<F>(path: &Path, f: F) -> CliResult
where
    F: FnOnce(&mut Vec<u8>) -> lowrank::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_text(path, &String::from_utf8(buf).expect("writers emit UTF-8"))
}

fn write_point(path: &Path, p: &FixedRankPoint) -> CliResult {
    write_with(path, |b| io::write_point_text(b, p))
}

fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    io::read_matrix(path).at(path)
}

fn read_point(path: &Path) -> CliResult<FixedRankPoint> {
    io::read_point(path).at(path)
}

pub fn truncate(g: &Global, input: &Path, r: usize, point: Option<PathBuf>, gap: Option<PathBuf>) -> CliResult {
    let a = read_matrix(input)?;
    let (p, report) = truncate_with(&a, r, &g.tol)?;
    g.ensure_out_dir()?;
    write_point(&g.output(point, "point.txt"), &p)?;
    let line = report.to_line();
    write_text(&g.output(gap, "gap.txt"), &format!("{line}\n"))?;
    println!("{line}");
    Ok(())
}

pub fn dsvd(g: &Global, input: &Path, r: usize, dir: &Path, out: Option<PathBuf>) -> CliResult {
    let a = read_matrix(input)?;
    let d = read_matrix(dir)?;
    let x = differential_with(&a, r, &d, &g.tol)?;
    let dense = x.dense();
    let deviation = (&dense - project_tangent(x.base(), &d)?.dense()).norm();
    let bound = deviation_bound(&a, r, &d)?;
    g.ensure_out_dir()?;
    let path = g.output(out, &format!("dsvd.{}", g.matrix_ext()));
    io::write_matrix(&path, &dense, g.format).at(&path)?;
    println!("deviation {deviation} bound {bound}");
    Ok(())
}

pub fn curvature(g: &Global, point: &Path, normal: &Path, project: bool, out: Option<PathBuf>) -> CliResult {
    let p = read_point(point)?;
    let n = read_matrix(normal)?;
    let n = if project {
        project_normal(&p, &n)?
    } else {
        NormalVector::new(&p, n).at(normal)?
    };
    let spec = curvature_spectrum_with(&n, &g.tol)?;
    let mut csv = String::from("i,j,kappa,residual\n");
    for e in &spec.entries {
        let res = weingarten(&n, &e.direction)?.axpy(-e.kappa, &e.direction)?.norm();
        csv.push_str(&format!("{},{},{},{}\n", e.i + 1, e.j + 1, e.kappa, res));
    }
    g.ensure_out_dir()?;
    write_text(&g.output(out, "curvature.csv"), &csv)?;
    println!(
        "normal_rank {} nonzero_count {} zero_count {}",
        spec.normal_rank, spec.nonzero_count, spec.zero_count
    );
    Ok(())
}

pub fn geodesic(
    g: &Global,
    point: &Path,
    tangent: &Path,
    steps: usize,
    end: Option<PathBuf>,
    csv_path: Option<PathBuf>,
) -> CliResult {
    let p = read_point(point)?;
    let x = project_tangent(&p, &read_matrix(tangent)?)?;
    let path = geodesic_path(&x, steps)?;
    let speed0 = x.norm();
    let mut csv = String::from("t,speed,speed_drift\n");
    for s in &path {
        let v = s.velocity.norm();
        let drift = if speed0 > 0.0 { (v - speed0).abs() / speed0 } else { v };
        csv.push_str(&format!("{},{},{}\n", s.t, v, drift));
    }
    g.ensure_out_dir()?;
    write_text(&g.output(csv_path, "geodesic.csv"), &csv)?;
    write_point(&g.output(end, "geodesic_end.txt"), &path.last().unwrap().point)?;
    Ok(())
}

/// Per-sample diagnostics against the reference solution `X(t)`:
/// gap of `X`, `|X - R|` and `|R - Pi(X)|`.
fn annotate(traj: &mut Trajectory, reference: &[(f64, DenseMatrix)], do_error: &[f64]) -> CliResult {
    for ((s, (_, x)), e) in traj.samples.iter_mut().zip(reference).zip(do_error) {
        let sigma = lowrank::linalg::singular_values(x)?;
        s.gap = Some(GapReport::from_spectrum(&sigma, s.point.rank()));
        s.residual_norm = (x - s.point.dense()).norm();
        s.reconstruction_error = *e;
    }
    Ok(())
}

pub fn do_run(g: &Global, descriptor: &Path) -> CliResult {
    let d = Descriptor::read(descriptor, g.seed)?;
    let field = d.field.build(d.l, d.m, d.seed)?;
    let a0 = d.initial_matrix();
    let (p0, _) = truncate_with(&a0, d.r, &g.tol)?;
    let (mut traj, stop) = integrate_do_partial(&p0, &field, &d.config);
    let reference = dense_reference(&a0, &field, &d.config)?;
    let n = traj.samples.len();
    let report = evaluate_error_bound(&traj, &reference[..n], &field, d.lipschitz)?;
    let kept = report.times.len();
    traj.samples.truncate(kept);
    annotate(&mut traj, &reference, &report.do_error)?;

    g.ensure_out_dir()?;
    write_with(&g.out_dir.join(&d.trajectory), |b| traj.write_csv(b))?;
    write_with(&g.out_dir.join(&d.error_report), |b| error_report_csv(&report, b))?;
    if let Some(dir) = &d.snapshots {
        for (k, s) in traj.samples.iter().enumerate().step_by(d.snapshot_stride) {
            write_point(&g.out_dir.join(dir).join(format!("point_{k:06}.txt")), &s.point)?;
        }
    }

    let crossing = match (&stop, report.crossing) {
        (Some(Error::SkeletonCrossing { t, gap }), _) => Some((*t, *gap)),
        (_, c) => c,
    };
    let status = match (&stop, crossing) {
        (_, Some(_)) => "crossing",
        (Some(_), None) => "failed",
        (None, None) => "completed",
    };
    let mut summary = vec![
        format!("status = {status}"),
        format!("field = {}", field_label(&field)),
        format!("scheme = {}", d.config.scheme.name()),
        format!("mode = {}", d.config.mode.name()),
        format!("samples = {kept}"),
    ];
    if let Some(last) = traj.last() {
        summary.push(format!("t_end = {}", last.t));
    }
    if let Some(e) = report.do_error.last() {
        summary.push(format!("terminal_do_error = {e:e}"));
        summary.push(format!("terminal_bound = {:e}", report.bound.last().unwrap()));
    }
    let max = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(*b));
    summary.push(format!("max_do_error = {:e}", max(&report.do_error)));
    summary.push(format!("max_bound = {:e}", max(&report.bound)));
    summary.push(format!("eta = {:e}", report.eta));
    let (kind, k) = match report.lipschitz {
        LipschitzConstant::Certified(k) => ("certified", k),
        LipschitzConstant::Estimated(k) => ("estimated", k),
    };
    summary.push(format!("lipschitz = {k:e}"));
    summary.push(format!("lipschitz_kind = {kind}"));
    summary.push(format!("bound_holds = {}", report.holds));
    if let (BuiltinField::Scalar(c), Some(last)) = (&field, traj.last()) {
        let exact = p0.dense() * (c * (last.t - d.config.t0)).exp();
        summary.push(format!("closed_form_error = {:e}", (last.point.dense() - exact).norm()));
    }
    if let Some((t, gap)) = crossing {
        summary.push(format!("crossing_t = {t}"));
        summary.push(format!("crossing_gap = {}", gap.to_line()));
    }
    if let Some(e) = &stop {
        summary.push(format!("stopped_by = {e}"));
    }
    write_text(&g.out_dir.join(&d.summary), &(summary.join("\n") + "\n"))?;

    match (stop, crossing) {
        (_, Some((t, gap))) => Err(Failure::new(
            EXIT_SKELETON,
            "skeleton_crossing",
            format!("run truncated at t = {t}: {gap}"),
        )),
        (Some(e), None) => Err(e.into()),
        (None, None) => Ok(()),
    }
}

fn field_label(f: &BuiltinField) -> String {
    match f {
        BuiltinField::Scalar(c) => format!("scalar({c})"),
        other => other.name().to_string(),
    }
}

pub enum PathKind {
    Linear,
    Exp(f64),
}

#[allow(clippy::too_many_arguments)]
pub fn track_svd(
    g: &Global,
    a: &Path,
    b: Option<&Path>,
    kind: PathKind,
    r: usize,
    (t0, t1, dt): (f64, f64, f64),
    out: Option<PathBuf>,
    end: Option<PathBuf>,
) -> CliResult {
    let a = read_matrix(a)?;
    let traj = match kind {
        PathKind::Linear => {
            let b_path = b.ok_or_else(|| Failure::usage("the linear path needs --b"))?;
            let b = read_matrix(b_path)?;
            if b.shape() != a.shape() {
                return Err(Failure::usage("A and B differ in shape").in_file(b_path));
            }
            track_best_rank(|t| Ok((&a + &b * t, b.clone())), t0, t1, dt, r)?
        }
        PathKind::Exp(c) => track_best_rank(
            |t| {
                let at = &a * (c * t).exp();
                Ok((at.clone(), at * c))
            },
            t0,
            t1,
            dt,
            r,
        )?,
    };
    g.ensure_out_dir()?;
    write_with(&g.output(out, "track.csv"), |w| traj.write_csv(w))?;
    write_point(&g.output(end, "track_end.txt"), &traj.last().unwrap().point)?;
    Ok(())
}

pub fn parse_step_rule(s: &str) -> Result<StepRule, String> {
    if s == "armijo" {
        return Ok(StepRule::armijo());
    }
    if let Some(v) = s.strip_prefix("fixed:") {
        return v
            .parse()
            .map(StepRule::Fixed)
            .map_err(|_| format!("invalid step size {v:?}"));
    }
    Err(format!("unknown step rule {s:?} (expected armijo or fixed:<alpha>)"))
}

pub struct OptimizeArgs {
    pub target: PathBuf,
    pub r: usize,
    pub method: Method,
    pub step: StepRule,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub point: Option<PathBuf>,
}

pub fn optimize(g: &Global, a: OptimizeArgs) -> CliResult {
    let target = read_matrix(&a.target)?;
    let init = match &a.init {
        Some(p) => Init::Point(read_point(p)?),
        None => Init::Random(g.seed),
    };
    let cfg = OptimConfig {
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        step_rule: a.step,
        method: a.method,
        probe_seed: g.seed,
        ..Default::default()
    };
    let (p, trace) = minimize(&target, a.r, &init, &cfg)?;
    g.ensure_out_dir()?;
    write_with(&g.output(a.trace, "trace.csv"), |w| trace.write_csv(w))?;
    write_point(&g.output(a.point, "optimum.txt"), &p)?;
    let last = trace.records.last().unwrap();
    let mut line = format!(
        "status {} iterations {} J {} grad_norm {}",
        trace.status, trace.iterations, last.j, last.grad_norm
    );
    if let Some(q) = trace.probe_min {
        line.push_str(&format!(" min_curvature_probe {q}"));
    }
    println!("{line}");
    Ok(())
}

pub fn stdout_flush() {
    let _ = std::io::stdout().flush();
}
