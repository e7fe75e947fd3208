//! Run descriptors: plain-text `key = value` files for `do-run`.
//!
//! ```text
//! # scalar growth
//! field = scalar(0.5)
//! l = 8
//! m = 6
//! r = 2
//! t1 = 1
//! dt = 0.01
//! scheme = rk4
//! ```
//!
//! Fields: `zero`, `scalar(c)`, `linear` (seeded), `linear(A.txt)`, `skew`,
//! `affine(A.txt, B.txt)`. Relative paths resolve against the descriptor's
//! directory. Without `init`, the initial matrix is a seeded Gaussian `l x m`
//! matrix. Random fields draw from `seed + 1`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lowrank::dynamics::{BuiltinField, DoRunConfig, Mode, Scheme};
use lowrank::{io, rng, DenseMatrix};

use crate::failure::{CliResult, Failure, WithPath};

const KEYS: &[&str] = &[
    "field",
    "l",
    "m",
    "r",
    "t0",
    "t1",
    "dt",
    "scheme",
    "mode",
    "seed",
    "gauge_every",
    "record_stride",
    "init",
    "lipschitz",
    "trajectory",
    "error_report",
    "summary",
    "snapshots",
    "snapshot_stride",
];

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Scalar(f64),
    Linear(Option<PathBuf>),
    Skew,
    Affine(PathBuf, PathBuf),
}

impl FieldSpec {
    fn parse(s: &str, base: &Path) -> Result<Self, String> {
        let (name, args) = match s.find('(') {
            Some(i) => {
                let rest = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| format!("missing ')' in field {s:?}"))?;
                let args: Vec<&str> = rest.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
                (s[..i].trim(), args)
            }
            None => (s.trim(), vec![]),
        };
        let path = |a: &str| base.join(a);
        match (name, args.as_slice()) {
            ("zero", []) => Ok(FieldSpec::Zero),
            ("scalar", [c]) => c
                .parse()
                .map(FieldSpec::Scalar)
                .map_err(|_| format!("invalid scalar coefficient {c:?}")),
            ("linear", []) => Ok(FieldSpec::Linear(None)),
            ("linear", [a]) => Ok(FieldSpec::Linear(Some(path(a)))),
            ("skew", []) => Ok(FieldSpec::Skew),
            ("affine", [a, b]) => Ok(FieldSpec::Affine(path(a), path(b))),
            _ => Err(format!(
                "unknown field {s:?} (expected zero, scalar(c), linear, linear(A), skew or affine(A, B))"
            )),
        }
    }

    pub fn build(&self, l: usize, m: usize, seed: u64) -> CliResult<BuiltinField> {
        let fseed = seed.wrapping_add(1);
        Ok(match self {
            FieldSpec::Zero => BuiltinField::Zero,
            FieldSpec::Scalar(c) => BuiltinField::Scalar(*c),
            FieldSpec::Linear(None) => BuiltinField::random_linear(l, fseed),
            FieldSpec::Linear(Some(p)) => BuiltinField::linear(io::read_matrix(p).at(p)?)?,
            FieldSpec::Skew => BuiltinField::skew(l, fseed),
            FieldSpec::Affine(pa, pb) => {
                let b = io::read_matrix(pb).at(pb)?;
                if b.shape() != (l, m) {
                    return Err(Failure::usage(format!(
                        "affine term is {}x{}, expected {l}x{m}",
                        b.nrows(),
                        b.ncols()
                    ))
                    .in_file(pb));
                }
                BuiltinField::affine(io::read_matrix(pa).at(pa)?, b)?
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct Descriptor {
    pub field: FieldSpec,
    pub l: usize,
    pub m: usize,
    pub r: usize,
    pub config: DoRunConfig,
    pub seed: u64,
    pub init: Option<DenseMatrix>,
    pub lipschitz: Option<f64>,
    pub trajectory: PathBuf,
    pub error_report: PathBuf,
    pub summary: PathBuf,
    pub snapshots: Option<PathBuf>,
    pub snapshot_stride: usize,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    n_lines: usize,
}

impl Entries {
    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::parse(*line, format!("invalid value {v:?} for {key}"))),
        }
    }

    fn with<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> CliResult<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => f(v).map(Some).map_err(|e| Failure::parse(*line, e)),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map(|e| e.0).unwrap_or(self.n_lines)
    }
}

impl Descriptor {
    pub fn read(path: &Path, default_seed: u64) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, default_seed).at(path)
    }

    pub fn parse(text: &str, base: &Path, default_seed: u64) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        let mut n_lines = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            n_lines = line;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| Failure::parse(line, format!("expected key = value, found {content:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Failure::parse(line, format!("unknown key {k:?}")));
            }
            if v.is_empty() {
                return Err(Failure::parse(line, format!("empty value for {k}")));
            }
            if let Some((prev, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(Failure::parse(line, format!("duplicate key {k} (first set on line {prev})")));
            }
        }
        let e = Entries { map, n_lines };

        let field = e
            .with("field", |v| FieldSpec::parse(v, base))?
            .ok_or_else(|| Failure::parse(n_lines, "missing key field"))?;
        let init = match e.map.get("init") {
            Some((line, v)) => {
                let p = base.join(v);
                let a = io::read_matrix(&p).map_err(|err| Failure::parse(*line, format!("init {}: {err}", p.display())))?;
                Some(a)
            }
            None => None,
        };
        let mut dims = [0usize; 2];
        for (slot, key) in dims.iter_mut().zip(["l", "m"]) {
            let given: Option<usize> = e.get(key)?;
            let from_init = init.as_ref().map(|a| if key == "l" { a.nrows() } else { a.ncols() });
            *slot = match (given, from_init) {
                (Some(g), Some(f)) if g != f => {
                    return Err(Failure::parse(e.line(key), format!("{key} = {g} but the init matrix has {f}")))
                }
                (Some(g), _) | (None, Some(g)) => g,
                (None, None) => return Err(Failure::parse(n_lines, format!("missing key {key}"))),
            };
            if *slot == 0 {
                return Err(Failure::parse(e.line(key), format!("{key} must be positive")));
            }
        }
        let [l, m] = dims;
        let r: usize = e.get("r")?.ok_or_else(|| Failure::parse(n_lines, "missing key r"))?;
        if r == 0 || r > l.min(m) {
            return Err(Failure::parse(e.line("r"), format!("r = {r} must lie in 1..={}", l.min(m))));
        }

        let defaults = DoRunConfig::default();
        let config = DoRunConfig {
            t0: e.get("t0")?.unwrap_or(defaults.t0),
            t1: e.get("t1")?.unwrap_or(defaults.t1),
            dt: e.get("dt")?.unwrap_or(defaults.dt),
            scheme: e
                .with("scheme", |v| v.parse::<Scheme>().map_err(|x| x.to_string()))?
                .unwrap_or(defaults.scheme),
            mode: e
                .with("mode", |v| v.parse::<Mode>().map_err(|x| x.to_string()))?
                .unwrap_or(defaults.mode),
            gauge_every: e.get("gauge_every")?.unwrap_or(defaults.gauge_every),
            record_stride: e.get("record_stride")?.unwrap_or(defaults.record_stride),
        };
        if let Err(err) = config.grid() {
            let key = if config.gauge_every == 0 {
                "gauge_every"
            } else if config.record_stride == 0 {
                "record_stride"
            } else {
                "dt"
            };
            return Err(Failure::parse(e.line(key), err));
        }
        let snapshot_stride: usize = e.get("snapshot_stride")?.unwrap_or(1);
        if snapshot_stride == 0 {
            return Err(Failure::parse(e.line("snapshot_stride"), "snapshot_stride must be positive"));
        }
        let path_or = |key: &str, default: &str| -> PathBuf {
            e.map.get(key).map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from(default))
        };
        Ok(Descriptor {
            field,
            l,
            m,
            r,
            config,
            seed: e.get("seed")?.unwrap_or(default_seed),
            init,
            lipschitz: e.get("lipschitz")?,
            trajectory: path_or("trajectory", "trajectory.csv"),
            error_report: path_or("error_report", "error_report.csv"),
            summary: path_or("summary", "summary.txt"),
            snapshots: e.map.get("snapshots").map(|(_, v)| PathBuf::from(v)),
            snapshot_stride,
        })
    }

    /// The dense initial matrix, before projection onto the manifold.
    pub fn initial_matrix(&self) -> DenseMatrix {
        match &self.init {
            Some(a) => a.clone(),
            None => rng::gaussian_matrix(&mut rng::seeded(self.seed), self.l, self.m),
        }
    }
}
