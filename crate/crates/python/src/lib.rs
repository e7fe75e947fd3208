//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use lowrank::dynamics::{
    dense_reference, evaluate_error_bound, integrate_do, BuiltinField, DoRunConfig,
};
use lowrank::io::{self, MatrixFormat};
use lowrank::manifold::{curvature_spectrum, exp_map, project_normal, project_tangent, NormalVector};
use lowrank::optim::{minimize as run_minimize, Init, OptimConfig};
use lowrank::projection;
use lowrank::{DenseMatrix, Error};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(lowrank_py, LowrankError, PyException);
create_exception!(lowrank_py, SkeletonCrossingError, LowrankError);

fn err(e: Error) -> PyErr {
    match e {
        Error::SkeletonCrossing { .. } => SkeletonCrossingError::new_err(e.to_string()),
        _ => LowrankError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<f64>>;

fn to_matrix(rows: &Rows) -> PyResult<DenseMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(LowrankError::new_err("ragged matrix rows"));
    }
    Ok(DenseMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn to_rows(a: &DenseMatrix) -> Rows {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A rank-r matrix `U Z^T` with orthonormal `U`.
#[pyclass(name = "FixedRankPoint", frozen, from_py_object)]
#[derive(Clone)]
struct Point {
    inner: lowrank::FixedRankPoint,
}

#[pymethods]
impl Point {
    #[new]
    fn new(u: Rows, z: Rows) -> PyResult<Self> {
        let inner = lowrank::FixedRankPoint::new(to_matrix(&u)?, to_matrix(&z)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn u(&self) -> Rows {
        to_rows(self.inner.u())
    }

    #[getter]
    fn z(&self) -> Rows {
        to_rows(self.inner.z())
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn dense(&self) -> Rows {
        to_rows(&self.inner.dense())
    }

    fn __repr__(&self) -> String {
        let (l, m) = self.inner.shape();
        format!("FixedRankPoint(shape=({l}, {m}), rank={})", self.inner.rank())
    }
}

fn point(p: lowrank::FixedRankPoint) -> Point {
    Point { inner: p }
}

/// Best rank-r approximation and its gap `(sigma_r, sigma_r1, relative_gap)`.
#[pyfunction]
fn truncate(a: Rows, r: usize) -> PyResult<(Point, (f64, f64, f64))> {
    let (p, g) = projection::truncate(&to_matrix(&a)?, r).map_err(err)?;
    Ok((point(p), (g.sigma_r, g.sigma_r_plus_1, g.relative_gap)))
}

/// Derivative of the truncated SVD at `a` along `direction`, as a dense matrix.
#[pyfunction]
fn differential(a: Rows, r: usize, direction: Rows) -> PyResult<Rows> {
    let x = projection::differential(&to_matrix(&a)?, r, &to_matrix(&direction)?).map_err(err)?;
    Ok(to_rows(&x.dense()))
}

#[pyfunction]
fn deviation_bound(a: Rows, r: usize, direction: Rows) -> PyResult<f64> {
    projection::deviation_bound(&to_matrix(&a)?, r, &to_matrix(&direction)?).map_err(err)
}

#[pyfunction]
fn tangent_projection(p: &Point, amb: Rows) -> PyResult<Rows> {
    let x = project_tangent(&p.inner, &to_matrix(&amb)?).map_err(err)?;
    Ok(to_rows(&x.dense()))
}

/// Principal curvatures `(i, j, kappa)` in the normal direction `normal`.
#[pyfunction]
#[pyo3(signature = (p, normal, project = false))]
fn curvatures(p: &Point, normal: Rows, project: bool) -> PyResult<Vec<(usize, usize, f64)>> {
    let n = to_matrix(&normal)?;
    let n = if project {
        project_normal(&p.inner, &n)
    } else {
        NormalVector::new(&p.inner, n)
    }
    .map_err(err)?;
    let spec = curvature_spectrum(&n).map_err(err)?;
    Ok(spec.entries.iter().map(|e| (e.i + 1, e.j + 1, e.kappa)).collect())
}

/// Endpoint of the geodesic from `p` along the tangent projection of `tangent`.
#[pyfunction]
#[pyo3(signature = (p, tangent, steps = 64))]
fn geodesic(p: &Point, tangent: Rows, steps: usize) -> PyResult<Point> {
    let x = project_tangent(&p.inner, &to_matrix(&tangent)?).map_err(err)?;
    let (end, _) = exp_map(&x, steps).map_err(err)?;
    Ok(point(end))
}

/// Minimizes `|R - target|^2 / 2` over rank-r matrices.
///
/// Returns the final point, the status and the trace rows
/// `(iter, j, grad_norm, step_size)`.
#[pyfunction]
#[pyo3(signature = (target, r, method = "gd", max_iters = 10_000, grad_tol = 1e-8, seed = 0, init = None))]
fn minimize(
    target: Rows,
    r: usize,
    method: &str,
    max_iters: usize,
    grad_tol: f64,
    seed: u64,
    init: Option<Point>,
) -> PyResult<(Point, String, Vec<(usize, f64, f64, f64)>)> {
    let cfg = OptimConfig {
        method: method.parse().map_err(err)?,
        max_iters,
        grad_tol,
        ..Default::default()
    };
    let init = match init {
        Some(p) => Init::Point(p.inner),
        None => Init::Random(seed),
    };
    let (p, trace) = run_minimize(&to_matrix(&target)?, r, &init, &cfg).map_err(err)?;
    let rows = trace
        .records
        .iter()
        .map(|x| (x.iter, x.j, x.grad_norm, x.step_size))
        .collect();
    Ok((point(p), trace.status.to_string(), rows))
}

fn build_field(field: &str, c: f64, a: Option<Rows>, b: Option<Rows>) -> PyResult<BuiltinField> {
    let f = match (field, a, b) {
        ("zero", None, None) => BuiltinField::Zero,
        ("scalar", None, None) => BuiltinField::Scalar(c),
        ("linear", Some(a), None) => BuiltinField::linear(to_matrix(&a)?).map_err(err)?,
        ("affine", Some(a), Some(b)) => {
            BuiltinField::affine(to_matrix(&a)?, to_matrix(&b)?).map_err(err)?
        }
        (name, _, _) => {
            return Err(LowrankError::new_err(format!(
                "field {name:?}: expected zero, scalar(c), linear(a) or affine(a, b)"
            )))
        }
    };
    Ok(f)
}

/// DO integration of `dR/dt = f(R)` from `truncate(r0, r)`.
///
/// Returns the recorded samples as `(t, point)` pairs and the error report
/// rows `(t, do_error, best_error, bound)`.
#[pyfunction]
#[pyo3(signature = (
    r0, r, field = "scalar", c = 0.0, a = None, b = None,
    t0 = 0.0, t1 = 1.0, dt = 1e-2, scheme = "rk4", mode = "factor_ode",
))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    r0: Rows,
    r: usize,
    field: &str,
    c: f64,
    a: Option<Rows>,
    b: Option<Rows>,
    t0: f64,
    t1: f64,
    dt: f64,
    scheme: &str,
    mode: &str,
) -> PyResult<(Vec<(f64, Point)>, Vec<(f64, f64, f64, f64)>)> {
    let f = build_field(field, c, a, b)?;
    let cfg = DoRunConfig {
        t0,
        t1,
        dt,
        scheme: scheme.parse().map_err(err)?,
        mode: mode.parse().map_err(err)?,
        ..Default::default()
    };
    let x0 = to_matrix(&r0)?;
    let (p0, _) = projection::truncate(&x0, r).map_err(err)?;
    let traj = integrate_do(&p0, &f, &cfg).map_err(err)?;
    let reference = dense_reference(&x0, &f, &cfg).map_err(err)?;
    let report = evaluate_error_bound(&traj, &reference, &f, None).map_err(err)?;
    let samples = traj
        .samples
        .into_iter()
        .map(|s| (s.t, point(s.point)))
        .collect();
    let rows = (0..report.times.len())
        .map(|k| {
            (
                report.times[k],
                report.do_error[k],
                report.best_error[k],
                report.bound[k],
            )
        })
        .collect();
    Ok((samples, rows))
}

#[pyfunction]
fn read_matrix(path: PathBuf) -> PyResult<Rows> {
    Ok(to_rows(&io::read_matrix(&path).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (path, a, binary = false))]
fn write_matrix(path: PathBuf, a: Rows, binary: bool) -> PyResult<()> {
    let format = if binary { MatrixFormat::Binary } else { MatrixFormat::Text };
    io::write_matrix(&path, &to_matrix(&a)?, format).map_err(err)
}

#[pyfunction]
fn read_point(path: PathBuf) -> PyResult<Point> {
    Ok(point(io::read_point(&path).map_err(err)?))
}

#[pyfunction]
fn write_point(path: PathBuf, p: &Point) -> PyResult<()> {
    io::write_point(&path, &p.inner).map_err(err)
}

#[pymodule]
fn lowrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LowrankError", m.py().get_type::<LowrankError>())?;
    m.add("SkeletonCrossingError", m.py().get_type::<SkeletonCrossingError>())?;
    m.add_class::<Point>()?;
    m.add_function(wrap_pyfunction!(truncate, m)?)?;
    m.add_function(wrap_pyfunction!(differential, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tangent_projection, m)?)?;
    m.add_function(wrap_pyfunction!(curvatures, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(read_point, m)?)?;
    m.add_function(wrap_pyfunction!(write_point, m)?)?;
    Ok(())
}
