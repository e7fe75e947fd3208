//! Numerical toolkit for dynamical low-rank approximation.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense substrate (one-sided Jacobi SVD, thin QR, Sylvester solver).
//! * [`manifold`]: the manifold of rank-`r` matrices `R = U Z^T` with the metric
//!   inherited from the Frobenius product: tangent and normal projections,
//!   Christoffel symbol, Weingarten map and principal curvatures, geodesics.
//! * [`projection`]: the truncated SVD as the orthogonal projection onto the
//!   manifold, its closed-form differential and the best rank-`r` tracking ODE.
//! * [`dynamics`]: the dynamically orthogonal (DO) reduced system, projected
//!   time stepping, a dense reference integrator and the a-posteriori error bound.
//! * [`optim`]: Riemannian gradient descent, conjugate gradient, Newton and the
//!   gradient flow for the distance functional `J(R) = |R - A|^2 / 2`.

pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod optim;
pub mod projection;
pub mod rng;
pub mod tolerances;
pub mod trajectory;

pub use nalgebra;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use manifold::{FixedRankPoint, NormalVector, TangentVector};
pub use projection::GapReport;
pub use tolerances::Tolerances;
pub use trajectory::{Trajectory, TrajectorySample};
