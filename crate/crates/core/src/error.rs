use thiserror::Error;

use crate::projection::GapReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Jacobi SVD did not converge after {sweeps} sweeps (relative off-diagonal residual {residual:e})")]
    SvdNoConvergence { sweeps: usize, residual: f64 },

    #[error(
        "near-singular Sylvester equation: eigenvalue {a} of A and eigenvalue {m} of M are separated by only {separation:e}"
    )]
    NearSingularSylvester { a: f64, m: f64, separation: f64 },

    #[error("rank-deficient input: sigma_{rank} = {sigma_r:e} is below the rank threshold relative to sigma_1 = {sigma_1:e}")]
    RankDeficient {
        rank: usize,
        sigma_r: f64,
        sigma_1: f64,
    },

    #[error("mode matrix is not column-orthonormal (|U^T U - I| = {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("tangent vector is not horizontal (|U^T X_U| = {deviation:e})")]
    NotHorizontal { deviation: f64 },

    #[error("matrix is not normal at the base point (residual {deviation:e})")]
    NotNormal { deviation: f64 },

    #[error("operands are anchored at different base points")]
    BaseMismatch,

    #[error("skeleton proximity: {gap}")]
    SkeletonProximity { gap: GapReport },

    #[error("crossing of the singular values at t = {t}: {gap}")]
    SkeletonCrossing { t: f64, gap: GapReport },

    #[error("geodesic left the manifold at t = {t} (sigma_min/sigma_max of Z = {ratio:e})")]
    GeodesicLeftManifold { t: f64, ratio: f64 },

    #[error("rank collapse at t = {t} (sigma_min/sigma_max of Z = {ratio:e})")]
    RankCollapse { t: f64, ratio: f64 },

    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("Armijo backtracking exhausted at iteration {iter} (gradient norm {grad_norm:e})")]
    StepRuleFailure { iter: usize, grad_norm: f64 },

    #[error("vector field evaluation failed: {0}")]
    Field(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
