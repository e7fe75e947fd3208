//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of a working copy of `A` are rotated pairwise until they are
//! mutually orthogonal to working precision; the column norms are then the
//! singular values. The relative stopping test keeps small singular values
//! accurate, which matters because the curvature formulas divide by them.

use super::{check_finite, DenseMatrix};
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// Thin SVD `A = U diag(sigma) V^T` with `p = min(l, m)` columns.
///
/// `sigma` is sorted descending. In each column of `U` the entry of largest
/// magnitude (lowest index on ties) is nonnegative; `V` follows `U`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (k, s) in self.sigma.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    svd_with(a, Tolerances::default().max_sweeps)
}

pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(svd(a)?.sigma)
}

pub fn svd_with(a: &DenseMatrix, max_sweeps: usize) -> Result<Svd> {
    check_finite(a)?;
    let (l, m) = a.shape();
    let (mut u, sigma, mut v) = if l >= m {
        one_sided_jacobi(a.clone(), max_sweeps)?
    } else {
        let (ut, s, vt) = one_sided_jacobi(a.transpose(), max_sweeps)?;
        (vt, s, ut)
    };
    fix_signs(&mut u, &mut v);
    Ok(Svd { u, sigma, v })
}

/// Works on `w` with `rows >= cols`; returns `(U, sigma, V)` with `U` of the
/// same shape as `w` and `V` square.
fn one_sided_jacobi(
    w: DenseMatrix,
    max_sweeps: usize,
) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let (rows, cols) = w.shape();
    let mut a: Vec<f64> = w.as_slice().to_vec(); // column-major
    let mut v = vec![0.0; cols * cols];
    for k in 0..cols {
        v[k * cols + k] = 1.0;
    }
    let tol = (rows.max(1) as f64) * f64::EPSILON;

    let mut converged = cols < 2;
    let mut residual = 0.0;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        let mut rotated = false;
        residual = 0.0f64;
        for i in 0..cols {
            for j in i + 1..cols {
                let (alpha, beta, gamma) = gram(&a, rows, i, j);
                if gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                let rel = gamma.abs() / scale;
                residual = residual.max(rel);
                if rel <= tol {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1f64.hypot(zeta));
                let c = 1.0 / 1f64.hypot(t);
                let s = c * t;
                rotate(&mut a, rows, i, j, c, s);
                rotate(&mut v, cols, i, j, c, s);
                rotated = true;
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: max_sweeps,
            residual,
        });
    }

    let norms: Vec<f64> = (0..cols)
        .map(|k| a[k * rows..(k + 1) * rows].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let mut u = DenseMatrix::zeros(rows, cols);
    let mut vm = DenseMatrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        let col = &a[src * rows..(src + 1) * rows];
        if s > f64::MIN_POSITIVE {
            for r in 0..rows {
                u[(r, dst)] = col[r] / s;
            }
        } else {
            missing.push(dst);
        }
        for r in 0..cols {
            vm[(r, dst)] = v[src * cols + r];
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok((u, sigma, vm))
}

#[inline]
fn gram(a: &[f64], rows: usize, i: usize, j: usize) -> (f64, f64, f64) {
    let ci = &a[i * rows..(i + 1) * rows];
    let cj = &a[j * rows..(j + 1) * rows];
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (x, y) in ci.iter().zip(cj) {
        alpha += x * x;
        beta += y * y;
        gamma += x * y;
    }
    (alpha, beta, gamma)
}

#[inline]
fn rotate(a: &mut [f64], rows: usize, i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = a.split_at_mut(j * rows);
    let ci = &mut head[i * rows..(i + 1) * rows];
    let cj = &mut tail[..rows];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xo, yo) = (*x, *y);
        *x = c * xo - s * yo;
        *y = s * xo + c * yo;
    }
}

/// Fills the listed (zero) columns of `u` with unit vectors orthogonal to all
/// other columns, drawn deterministically from the canonical basis.
fn complete_orthonormal(u: &mut DenseMatrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let rows = u.nrows();
    let mut candidate = 0;
    for &k in missing {
        while candidate < rows {
            let mut e = nalgebra::DVector::<f64>::zeros(rows);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for c in 0..u.ncols() {
                    if c == k {
                        continue;
                    }
                    let col = u.column(c);
                    let proj = col.dot(&e);
                    e.axpy(-proj, &col, 1.0);
                }
            }
            let n = e.norm();
            if n > 0.5 {
                u.set_column(k, &(e / n));
                break;
            }
        }
    }
}

fn fix_signs(u: &mut DenseMatrix, v: &mut DenseMatrix) {
    for k in 0..u.ncols() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..u.nrows() {
            let x = u[(i, k)].abs();
            if x > best_abs {
                best_abs = x;
                best = i;
            }
        }
        if u[(best, k)] < 0.0 {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }
}
