use std::fmt;

use lowrank::Error;

pub const EXIT_IO: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_SKELETON: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;

/// Error reported on stderr as a single `error code=<n> kind=<kind>: <msg>` line.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub msg: String,
}

impl Failure {
    pub fn new(code: u8, kind: &'static str, msg: impl Into<String>) -> Self {
        Self {
            code,
            kind,
            msg: msg.into(),
        }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self::new(EXIT_IO, "io", msg)
    }

    pub fn parse(line: usize, msg: impl fmt::Display) -> Self {
        Self::new(EXIT_IO, "parse", format!("line {line}: {msg}"))
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::new(EXIT_PRECONDITION, "invalid_argument", msg)
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(mut self, path: &std::path::Path) -> Self {
        self.msg = format!("{}: {}", path.display(), self.msg);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error code={} kind={}: {}", self.code, self.kind, self.msg)
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::ShapeMismatch { .. } => "shape_mismatch",
        Error::NonFinite { .. } => "non_finite",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::SvdNoConvergence { .. } => "svd_no_convergence",
        Error::NearSingularSylvester { .. } => "near_singular_sylvester",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::NotOrthonormal { .. } => "not_orthonormal",
        Error::NotHorizontal { .. } => "not_horizontal",
        Error::NotNormal { .. } => "not_normal",
        Error::BaseMismatch => "base_mismatch",
        Error::SkeletonProximity { .. } => "skeleton_proximity",
        Error::SkeletonCrossing { .. } => "skeleton_crossing",
        Error::GeodesicLeftManifold { .. } => "geodesic_left_manifold",
        Error::RankCollapse { .. } => "rank_collapse",
        Error::Divergence { .. } => "divergence",
        Error::StepRuleFailure { .. } => "step_rule_failure",
        Error::Field(_) => "field",
        Error::Parse { .. } => "parse",
        Error::Io(_) => "io",
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse { .. } => EXIT_IO,
            Error::SkeletonCrossing { .. } => EXIT_SKELETON,
            _ => EXIT_PRECONDITION,
        };
        Failure::new(code, kind(&e), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Attaches a path to errors from reading or writing it.
pub trait WithPath<T> {
    fn at(self, path: &std::path::Path) -> CliResult<T>;
}

impl<T, E: Into<Failure>> WithPath<T> for Result<T, E> {
    fn at(self, path: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| e.into().in_file(path))
    }
}
