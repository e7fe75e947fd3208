//! Seeded experiment recipes. Each writes its CSVs and `summary.txt` into
//! the output directory; a failed check exits with code 4.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use lowrank::dynamics::{
    dense_reference, error_report_csv, evaluate_error_bound, integrate_do, BuiltinField, DoRunConfig,
    Mode, Scheme,
};
use lowrank::manifold::{curvature_spectrum, weingarten, weingarten_eigenvalues};
use lowrank::optim::{
    distance_j, grad_j, minimize, Init, IterRecord, Method, OptimConfig, OptimStatus, OptimTrace,
};
use lowrank::projection::{deviation_bound, differential, truncate};
use lowrank::rng::{self, Rng};
use lowrank::{DenseMatrix, FixedRankPoint, NormalVector};

use crate::commands::{write_text, write_with, Global};
use crate::failure::{CliResult, Failure, EXIT_CHECK_FAILED};

pub const RECIPES: &[&str] = &[
    "fig-optimization",
    "do-error",
    "scheme-order",
    "curvature-audit",
    "dsvd-fd-audit",
];

struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    fn parse(sets: &[String], allowed: &[&str]) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("--set expects key=value, got {s:?}")))?;
            let k = k.trim();
            if !allowed.contains(&k) {
                return Err(Failure::usage(format!(
                    "unknown parameter {k:?} (accepted: {})",
                    allowed.join(", ")
                )));
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Failure::usage(format!("invalid value {v:?} for parameter {key}"))),
        }
    }
}

#[derive(Default)]
struct Summary {
    lines: Vec<String>,
    failed: Vec<String>,
}

impl Summary {
    fn metric(&mut self, key: &str, v: impl Display) {
        self.lines.push(format!("{key} = {v}"));
    }

    fn value(&mut self, key: &str, v: f64) {
        self.lines.push(format!("{key} = {v:e}"));
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Display) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.lines.push(format!("check {name} {verdict} {detail}"));
        if !pass {
            self.failed.push(name.to_string());
        }
    }

    fn finish(self, g: &Global, recipe: &str) -> CliResult {
        let mut text = format!("recipe = {recipe}\nseed = {}\n", g.seed);
        for l in &self.lines {
            text.push_str(l);
            text.push('\n');
        }
        write_text(&g.out_dir.join("summary.txt"), &text)?;
        print!("{text}");
        if self.failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::new(
                EXIT_CHECK_FAILED,
                "check_failed",
                format!("{recipe}: failed checks {}", self.failed.join(", ")),
            ))
        }
    }
}

pub fn run(g: &Global, recipe: &str, sets: &[String]) -> CliResult {
    g.ensure_out_dir()?;
    match recipe {
        "fig-optimization" => fig_optimization(g, sets),
        "do-error" => do_error(g, sets),
        "scheme-order" => scheme_order(g, sets),
        "curvature-audit" => curvature_audit(g, sets),
        "dsvd-fd-audit" => dsvd_fd_audit(g, sets),
        _ => Err(Failure::usage(format!(
            "unknown recipe {recipe:?} (expected one of {})",
            RECIPES.join(", ")
        ))),
    }
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(" "))
}

fn trace_csv(g: &Global, name: &str, trace: &OptimTrace) -> CliResult {
    write_with(&g.out_dir.join(name), |w| trace.write_csv(w))
}

fn fig_optimization(g: &Global, sets: &[String]) -> CliResult {
    let p = Params::parse(
        sets,
        &["l", "m", "r", "sigma_max", "sigma_min", "max_iters", "warm_tol", "newton_iters"],
    )?;
    let (l, m, r) = (p.get("l", 150usize)?, p.get("m", 100usize)?, p.get("r", 5usize)?);
    let (smax, smin) = (p.get("sigma_max", 10.0f64)?, p.get("sigma_min", 1.0f64)?);
    let max_iters = p.get("max_iters", 20_000usize)?;
    let warm_tol = p.get("warm_tol", 0.3f64)?;
    let newton_iters = p.get("newton_iters", 12usize)?;
    let q = l.min(m);
    if r == 0 || r >= q || !(smax > smin && smin > 0.0) {
        return Err(Failure::usage("need 0 < r < min(l, m) and sigma_max > sigma_min > 0"));
    }
    let sigma: Vec<f64> = (0..q).map(|i| smax - (smax - smin) * i as f64 / (q - 1) as f64).collect();
    let j_star = 0.5 * sigma[r..].iter().map(|s| s * s).sum::<f64>();
    let target = rng::with_singular_values(&mut rng::seeded(g.seed), l, m, &sigma);
    let best = truncate(&target, r)?.0.dense();
    let init = Init::Random(g.seed.wrapping_add(1));
    let mut s = Summary::default();
    s.value("j_star", j_star);

    for (method, name) in [(Method::Gd, "gd"), (Method::Cg, "cg")] {
        let cfg = OptimConfig {
            method,
            max_iters,
            ..Default::default()
        };
        let (pt, trace) = minimize(&target, r, &init, &cfg)?;
        trace_csv(g, &format!("{name}.csv"), &trace)?;
        let last = trace.records.last().unwrap();
        let j_rel = (distance_j(&pt, &target)? - j_star).abs() / j_star;
        s.metric(&format!("{name}_iterations"), trace.iterations);
        s.value(&format!("{name}_grad_norm"), last.grad_norm);
        s.value(&format!("{name}_j_rel_error"), j_rel);
        s.check(
            &format!("{name}_converged"),
            trace.status == OptimStatus::Converged && last.grad_norm <= 1e-8,
            format!("status {} grad_norm {:.3e}", trace.status, last.grad_norm),
        );
        s.check(&format!("{name}_j_star"), j_rel <= 1e-8, format!("relative error {j_rel:.3e}"));
        if method == Method::Gd {
            // Linear rate: slope of log |grad| over the second half of the run.
            let tail = &trace.records[trace.records.len() / 2..];
            let it: Vec<f64> = tail.iter().map(|r| r.iter as f64).collect();
            let lg: Vec<f64> = tail.iter().map(|r| r.grad_norm.ln()).collect();
            let rate = slope(&it, &lg).exp();
            s.value("gd_rate", rate);
            s.check("gd_linear_rate", rate < 1.0, format!("contraction per iteration {rate:.6}"));
        }
    }

    // Newton from a gradient-descent warm start, one step at a time.
    let warm_cfg = OptimConfig {
        grad_tol: warm_tol,
        max_iters,
        ..Default::default()
    };
    let (mut pt, _) = minimize(&target, r, &init, &warm_cfg)?;
    let step_cfg = OptimConfig {
        method: Method::Newton,
        max_iters: 1,
        grad_tol: 0.0,
        record_trace: false,
        ..Default::default()
    };
    let record = |k: usize, pt: &FixedRankPoint, step: f64| -> CliResult<(IterRecord, f64)> {
        let rec = IterRecord {
            iter: k,
            j: distance_j(pt, &target)?,
            grad_norm: grad_j(pt, &target)?.norm(),
            step_size: step,
        };
        Ok((rec, (pt.dense() - &best).norm()))
    };
    let (first, e0) = record(0, &pt, 0.0)?;
    let mut records = vec![first];
    let mut errors = vec![e0];
    for k in 1..=newton_iters {
        let (next, _) = minimize(&target, r, &Init::Point(pt), &step_cfg)?;
        pt = next;
        let (rec, e) = record(k, &pt, 1.0)?;
        let done = rec.grad_norm <= 1e-12 || e < 1e-11;
        records.push(rec);
        errors.push(e);
        if done {
            break;
        }
    }
    let final_grad = records.last().unwrap().grad_norm;
    let newton = OptimTrace {
        iterations: records.len() - 1,
        records,
        status: if final_grad <= 1e-8 {
            OptimStatus::Converged
        } else {
            OptimStatus::MaxIters
        },
        probe_min: None,
    };
    trace_csv(g, "newton.csv", &newton)?;
    let mut csv = String::from("iter,error,ratio\n");
    for (k, e) in errors.iter().enumerate() {
        let ratio = if k == 0 { f64::NAN } else { e / (errors[k - 1] * errors[k - 1]) };
        csv.push_str(&format!("{k},{e},{ratio}\n"));
    }
    write_text(&g.out_dir.join("newton_errors.csv"), &csv)?;
    // Ratios e_{k+1} / e_k^2 over transitions that stay above the rounding floor.
    let ratios: Vec<f64> = errors
        .windows(2)
        .filter(|w| w[1] >= 1e-11)
        .map(|w| w[1] / (w[0] * w[0]))
        .collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    s.metric("newton_errors", fmt_list(&errors));
    s.metric("newton_ratios", fmt_list(tail));
    s.check(
        "newton_quadratic_tail",
        tail.len() == 3 && tail.iter().all(|q| *q <= 100.0) && newton.status == OptimStatus::Converged,
        format!("last ratios {} final grad_norm {final_grad:.3e}", fmt_list(tail)),
    );
    s.finish(g, "fig-optimization")
}

/// Decaying spectrum with a clear gap after the first `r` values.
fn gapped_decay(q: usize, r: usize) -> Vec<f64> {
    (0..q)
        .map(|i| {
            if i < r {
                5.0 * 0.8f64.powi(i as i32)
            } else {
                0.6f64.powi((i - r) as i32)
            }
        })
        .collect()
}

fn do_error(g: &Global, sets: &[String]) -> CliResult {
    let p = Params::parse(sets, &["l", "m", "r", "instances", "t1", "dt"])?;
    let (l, m, r) = (p.get("l", 8usize)?, p.get("m", 6usize)?, p.get("r", 2usize)?);
    let instances = p.get("instances", 20u64)?;
    let cfg = DoRunConfig {
        t1: p.get("t1", 1.0)?,
        dt: p.get("dt", 1e-2)?,
        ..Default::default()
    };
    if r == 0 || r >= l.min(m) {
        return Err(Failure::usage("need 0 < r < min(l, m)"));
    }
    let sigma = gapped_decay(l.min(m), r);
    let mut s = Summary::default();
    let mut csv = String::from("instance,max_do_error,final_bound,max_ratio,eta,holds,crossing_t\n");
    let (mut all_hold, mut crossings, mut worst_ratio, mut max_bound) = (true, 0, 0.0f64, 0.0f64);
    for k in 0..instances {
        let seed = g.seed.wrapping_mul(1000).wrapping_add(k);
        let a0 = rng::with_singular_values(&mut rng::seeded(seed), l, m, &sigma);
        let f = BuiltinField::random_linear(l, seed.wrapping_add(500));
        let p0 = truncate(&a0, r)?.0;
        let traj = integrate_do(&p0, &f, &cfg)?;
        let reference = dense_reference(&a0, &f, &cfg)?;
        let rep = evaluate_error_bound(&traj, &reference, &f, None)?;
        write_with(&g.out_dir.join(format!("do_error_{k:03}.csv")), |w| error_report_csv(&rep, w))?;
        // Largest do_error / bound over samples with a positive bound.
        let ratio = rep
            .do_error
            .iter()
            .zip(&rep.bound)
            .filter(|(_, b)| **b > 0.0)
            .map(|(e, b)| e / b)
            .fold(0.0f64, f64::max);
        let max_err = rep.do_error.iter().fold(0.0f64, |a, b| a.max(*b));
        let fb = rep.bound.last().copied().unwrap_or(f64::NAN);
        let ct = rep.crossing.map(|c| c.0).unwrap_or(f64::NAN);
        csv.push_str(&format!("{k},{max_err:e},{fb:e},{ratio:e},{:e},{},{ct}\n", rep.eta, rep.holds));
        all_hold &= rep.holds;
        crossings += rep.crossing.is_some() as usize;
        worst_ratio = worst_ratio.max(ratio);
        max_bound = max_bound.max(fb);
    }
    write_text(&g.out_dir.join("do_error.csv"), &csv)?;
    s.metric("instances", instances);
    s.value("max_error_to_bound_ratio", worst_ratio);
    s.value("max_final_bound", max_bound);
    s.check("bound_holds", all_hold, format!("max do_error / bound {worst_ratio:.3e}"));
    s.check("gap_maintained", crossings == 0, format!("{crossings} crossings"));
    s.finish(g, "do-error")
}

fn scheme_order(g: &Global, sets: &[String]) -> CliResult {
    let p = Params::parse(sets, &["c", "l", "m", "r", "t1"])?;
    let c = p.get("c", 0.5f64)?;
    let (l, m, r) = (p.get("l", 8usize)?, p.get("m", 6usize)?, p.get("r", 2usize)?);
    let t1 = p.get("t1", 1.0f64)?;
    if r == 0 || r >= l.min(m) {
        return Err(Failure::usage("need 0 < r < min(l, m)"));
    }
    let dts = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let a = rng::with_singular_values(&mut rng::seeded(g.seed), l, m, &gapped_decay(l.min(m), r));
    let p0 = truncate(&a, r)?.0;
    let exact = p0.dense() * (c * t1).exp();
    let f = BuiltinField::Scalar(c);
    let mut s = Summary::default();
    let mut csv = String::from("mode,scheme,dt,error\n");
    for mode in [Mode::FactorOde, Mode::ProjectedStep] {
        for (scheme, order) in [(Scheme::Euler, 1.0), (Scheme::HeunRk2, 2.0)] {
            let mut errs = Vec::new();
            for &dt in &dts {
                let cfg = DoRunConfig {
                    t1,
                    dt,
                    scheme,
                    mode,
                    ..Default::default()
                };
                let traj = integrate_do(&p0, &f, &cfg)?;
                let e = (traj.last().unwrap().point.dense() - &exact).norm();
                csv.push_str(&format!("{},{},{dt},{e}\n", mode.name(), scheme.name()));
                errs.push(e);
            }
            let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
            let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let q = slope(&lx, &ly);
            let name = format!("order_{}_{}", mode.name(), scheme.name());
            s.value(&name, q);
            s.check(&name, (q - order).abs() <= 0.2, format!("fitted {q:.4}, expected {order} +- 0.2"));
        }
    }
    write_text(&g.out_dir.join("scheme_order.csv"), &csv)?;
    s.finish(g, "scheme-order")
}

fn diag(d: &[f64]) -> DenseMatrix {
    DenseMatrix::from_diagonal(&lowrank::nalgebra::DVector::from_column_slice(d))
}

fn uniform_sorted(g: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng::uniform(g, lo, hi)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn curvature_audit(g: &Global, sets: &[String]) -> CliResult {
    let p = Params::parse(sets, &["l", "m", "r", "k", "instances"])?;
    let (l, m, r, k) = (p.get("l", 6usize)?, p.get("m", 5usize)?, p.get("r", 2usize)?, p.get("k", 2usize)?);
    let instances = p.get("instances", 100u64)?;
    if r == 0 || k == 0 || r + k > l.min(m) {
        return Err(Failure::usage("need r, k > 0 and r + k <= min(l, m)"));
    }
    let mut s = Summary::default();
    let mut csv = String::from("instance,nonzero_count,max_relation_residual,max_spectrum_error\n");
    let (mut worst_rel, mut worst_eig, mut bad_count) = (0.0f64, 0.0f64, 0usize);
    for inst in 0..instances {
        let mut rg = rng::seeded(g.seed.wrapping_mul(1000).wrapping_add(inst));
        let uf = rng::random_orthonormal(&mut rg, l, r + k);
        let vf = rng::random_orthonormal(&mut rg, m, r + k);
        let sig = uniform_sorted(&mut rg, r, 1.0, 3.0);
        let nsig = uniform_sorted(&mut rg, k, 0.1, 2.0);
        let base = FixedRankPoint::new(uf.columns(0, r).into_owned(), vf.columns(0, r) * diag(&sig))?;
        let n = uf.columns(r, k) * diag(&nsig) * vf.columns(r, k).transpose();
        let n = NormalVector::new(&base, n)?;
        let spec = curvature_spectrum(&n)?;
        let mut rel = 0.0f64;
        for e in &spec.entries {
            rel = rel.max(weingarten(&n, &e.direction)?.axpy(-e.kappa, &e.direction)?.norm());
        }
        let mut expected = vec![0.0; (m - k) * r + (l - k - r) * r];
        for a in &sig {
            for b in &nsig {
                expected.push(b / a);
                expected.push(-b / a);
            }
        }
        expected.sort_by(f64::total_cmp);
        let mut got = weingarten_eigenvalues(&n)?;
        got.sort_by(f64::total_cmp);
        let eig = if got.len() == expected.len() {
            got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        csv.push_str(&format!("{inst},{},{rel},{eig}\n", spec.nonzero_count));
        worst_rel = worst_rel.max(rel);
        worst_eig = worst_eig.max(eig);
        bad_count += (spec.nonzero_count != 2 * k * r) as usize;
    }
    write_text(&g.out_dir.join("curvature_audit.csv"), &csv)?;
    s.metric("instances", instances);
    s.value("max_relation_residual", worst_rel);
    s.value("max_spectrum_error", worst_eig);
    s.check("eigen_relations", worst_rel <= 1e-10, format!("max residual {worst_rel:.3e}"));
    s.check("spectrum", worst_eig <= 1e-10, format!("max error {worst_eig:.3e}"));
    s.check(
        "nonzero_count",
        bad_count == 0,
        format!("expected {} in every instance, {bad_count} mismatches", 2 * k * r),
    );
    s.finish(g, "curvature-audit")
}

fn dsvd_fd_audit(g: &Global, sets: &[String]) -> CliResult {
    let p = Params::parse(sets, &["l", "m", "r", "instances", "h", "min_gap"])?;
    let (l, m, r) = (p.get("l", 8usize)?, p.get("m", 6usize)?, p.get("r", 2usize)?);
    let instances = p.get("instances", 100u64)?;
    let h = p.get("h", 1e-5f64)?;
    let min_gap = p.get("min_gap", 0.05f64)?;
    let q = l.min(m);
    if r == 0 || r >= q || !(min_gap > 0.0 && min_gap < 0.5) || !(h > 0.0) {
        return Err(Failure::usage("need 0 < r < min(l, m), 0 < min_gap < 0.5 and h > 0"));
    }
    let mut s = Summary::default();
    let mut csv = String::from("instance,relative_gap,fd_error,deviation,deviation_bound\n");
    let (mut worst, mut bound_violations) = (0.0f64, 0usize);
    for inst in 0..instances {
        let mut rg = rng::seeded(g.seed.wrapping_mul(1000).wrapping_add(inst));
        let sigma = loop {
            let v = uniform_sorted(&mut rg, q, 0.1, 5.0);
            if (v[r - 1] - v[r]) / v[0] >= min_gap {
                break v;
            }
        };
        let a = rng::with_singular_values(&mut rg, l, m, &sigma);
        let dir = rng::gaussian_matrix(&mut rg, l, m);
        let plus = truncate(&(&a + &dir * h), r)?.0.dense();
        let minus = truncate(&(&a - &dir * h), r)?.0.dense();
        let fd = (plus - minus) / (2.0 * h);
        let d = differential(&a, r, &dir)?;
        let err = (d.dense() - &fd).norm() / fd.norm();
        let deviation = (d.dense() - lowrank::manifold::project_tangent(d.base(), &dir)?.dense()).norm();
        let bound = deviation_bound(&a, r, &dir)?;
        let gap = (sigma[r - 1] - sigma[r]) / sigma[0];
        csv.push_str(&format!("{inst},{gap},{err},{deviation},{bound}\n"));
        worst = worst.max(err);
        bound_violations += (deviation > bound * (1.0 + 1e-12)) as usize;
    }
    write_text(&g.out_dir.join("dsvd_fd_audit.csv"), &csv)?;
    s.metric("instances", instances);
    s.value("max_fd_error", worst);
    s.check("finite_difference", worst <= 1e-6, format!("max relative error {worst:.3e}"));
    s.check("deviation_bound", bound_violations == 0, format!("{bound_violations} violations"));
    s.finish(g, "dsvd-fd-audit")
}
