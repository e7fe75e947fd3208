use crate::error::{Error, Result};
use crate::linalg::{check_finite, operator_norm, DenseMatrix};
use crate::rng;

/// A full-space vector field `f(t, R)` with an optional Lipschitz constant
/// in `R` (Frobenius norm).
pub trait VectorField {
    fn eval(&self, t: f64, r: &DenseMatrix) -> Result<DenseMatrix>;

    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Wraps a closure.
pub struct FnField<F> {
    f: F,
    lipschitz: Option<f64>,
}

impl<F> FnField<F>
where
    F: Fn(f64, &DenseMatrix) -> Result<DenseMatrix>,
{
    pub fn new(f: F, lipschitz: Option<f64>) -> Self {
        Self { f, lipschitz }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, &DenseMatrix) -> Result<DenseMatrix>,
{
    fn eval(&self, t: f64, r: &DenseMatrix) -> Result<DenseMatrix> {
        (self.f)(t, r)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// Fields selectable from run descriptors.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinField {
    Zero,
    /// `c R`
    Scalar(f64),
    /// `A R`
    Linear { a: DenseMatrix, k: f64 },
    /// `A R + B`
    Affine { a: DenseMatrix, b: DenseMatrix, k: f64 },
}

impl BuiltinField {
    pub fn linear(a: DenseMatrix) -> Result<Self> {
        check_square(&a)?;
        let k = operator_norm(&a)?;
        Ok(BuiltinField::Linear { a, k })
    }

    pub fn affine(a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        check_square(&a)?;
        check_finite(&b)?;
        if b.nrows() != a.nrows() {
            return Err(Error::ShapeMismatch {
                expected: (a.nrows(), b.ncols()),
                found: b.shape(),
            });
        }
        let k = operator_norm(&a)?;
        Ok(BuiltinField::Affine { a, b, k })
    }

    /// `A R` with standard-normal `A / sqrt(l)`.
    pub fn random_linear(l: usize, seed: u64) -> Self {
        let a = rng::gaussian_matrix(&mut rng::seeded(seed), l, l) / (l as f64).sqrt();
        Self::linear(a).expect("finite square matrix")
    }

    /// `A R` with a seeded skew-symmetric `A`; the flow preserves `|R|`.
    pub fn skew(l: usize, seed: u64) -> Self {
        let g = rng::gaussian_matrix(&mut rng::seeded(seed), l, l);
        let a = (&g - g.transpose()) / (2.0 * (l as f64).sqrt());
        Self::linear(a).expect("finite square matrix")
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinField::Zero => "zero",
            BuiltinField::Scalar(_) => "scalar",
            BuiltinField::Linear { .. } => "linear",
            BuiltinField::Affine { .. } => "affine",
        }
    }
}

fn check_square(a: &DenseMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "field matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)
}

fn check_rows(a: &DenseMatrix, r: &DenseMatrix) -> Result<()> {
    if a.ncols() != r.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (a.ncols(), r.ncols()),
            found: r.shape(),
        });
    }
    Ok(())
}

impl VectorField for BuiltinField {
    fn eval(&self, _t: f64, r: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            BuiltinField::Zero => Ok(DenseMatrix::zeros(r.nrows(), r.ncols())),
            BuiltinField::Scalar(c) => Ok(r * *c),
            BuiltinField::Linear { a, .. } => {
                check_rows(a, r)?;
                Ok(a * r)
            }
            BuiltinField::Affine { a, b, .. } => {
                check_rows(a, r)?;
                if b.shape() != r.shape() {
                    return Err(Error::ShapeMismatch {
                        expected: r.shape(),
                        found: b.shape(),
                    });
                }
                Ok(a * r + b)
            }
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(match self {
            BuiltinField::Zero => 0.0,
            BuiltinField::Scalar(c) => c.abs(),
            BuiltinField::Linear { k, .. } | BuiltinField::Affine { k, .. } => *k,
        })
    }
}
