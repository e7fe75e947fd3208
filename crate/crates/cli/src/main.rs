mod commands;
mod descriptor;
mod experiment;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lowrank::io::MatrixFormat;
use lowrank::optim::{Method, StepRule};
use lowrank::Tolerances;

use commands::{Global, OptimizeArgs, PathKind};
use failure::{CliResult, Failure};

#[derive(Parser)]
#[command(name = "lowrank", version, about = "Dynamical low-rank approximation toolkit")]
struct Cli {
    /// Seed for every random quantity
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Minimum relative gap (sigma_r - sigma_{r+1}) / sigma_1
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_gap: f64,
    /// Format of matrix outputs
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Directory for outputs without an explicit path
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrackPath {
    /// A + t B
    Linear,
    /// exp(c t) A
    Exp,
}

#[derive(Subcommand)]
enum Command {
    /// Best rank-r approximation of a matrix
    Truncate {
        input: PathBuf,
        #[arg(short, long)]
        r: usize,
        /// Output point file [default: OUT_DIR/point.txt]
        #[arg(long)]
        point: Option<PathBuf>,
        /// Output gap line [default: OUT_DIR/gap.txt]
        #[arg(long)]
        gap: Option<PathBuf>,
    },
    /// Differential of the truncated SVD along a direction
    Dsvd {
        input: PathBuf,
        #[arg(short, long)]
        r: usize,
        /// Direction matrix
        #[arg(long)]
        dir: PathBuf,
        /// Output matrix [default: OUT_DIR/dsvd.txt or .bin]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal curvatures in a normal direction
    Curvature {
        /// Base point file
        point: PathBuf,
        /// Normal matrix
        normal: PathBuf,
        /// Project the matrix onto the normal space first
        #[arg(long)]
        project: bool,
        /// Output CSV [default: OUT_DIR/curvature.csv]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geodesic from a point along a tangent direction
    Geodesic {
        /// Base point file
        point: PathBuf,
        /// Ambient matrix, projected onto the tangent space
        tangent: PathBuf,
        #[arg(long, default_value_t = lowrank::manifold::DEFAULT_GEODESIC_STEPS)]
        steps: usize,
        /// Endpoint file [default: OUT_DIR/geodesic_end.txt]
        #[arg(long)]
        end: Option<PathBuf>,
        /// Speed CSV [default: OUT_DIR/geodesic.csv]
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// DO integration from a run descriptor
    DoRun { descriptor: PathBuf },
    /// Track the best rank-r approximation along a matrix path
    TrackSvd {
        /// Matrix A
        #[arg(long)]
        a: PathBuf,
        /// Matrix B (linear path)
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TrackPath::Linear)]
        path: TrackPath,
        /// Rate c (exp path)
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(short, long)]
        r: usize,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        /// Trajectory CSV [default: OUT_DIR/track.csv]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Terminal point [default: OUT_DIR/track_end.txt]
        #[arg(long)]
        end: Option<PathBuf>,
    },
    /// Minimize |R - A|^2 / 2 over rank-r matrices
    Optimize {
        target: PathBuf,
        #[arg(short, long)]
        r: usize,
        /// gd, cg or newton
        #[arg(long, default_value = "gd")]
        method: String,
        /// armijo or fixed:<alpha>
        #[arg(long, default_value = "armijo")]
        step: String,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-8)]
        grad_tol: f64,
        /// Initial point file [default: seeded random]
        #[arg(long)]
        init: Option<PathBuf>,
        /// Trace CSV [default: OUT_DIR/trace.csv]
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Final point [default: OUT_DIR/optimum.txt]
        #[arg(long)]
        point: Option<PathBuf>,
    },
    /// Run a seeded experiment recipe
    Experiment {
        /// fig-optimization, do-error, scheme-order, curvature-audit or dsvd-fd-audit
        recipe: String,
        /// Parameter override key=value (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn run(cli: Cli) -> CliResult {
    if !(cli.tol_gap >= 0.0) {
        return Err(Failure::usage("--tol-gap must be nonnegative"));
    }
    let g = Global {
        seed: cli.seed,
        tol: Tolerances {
            gap: cli.tol_gap,
            ..Default::default()
        },
        format: match cli.format {
            Format::Text => MatrixFormat::Text,
            Format::Binary => MatrixFormat::Binary,
        },
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Truncate { input, r, point, gap } => commands::truncate(&g, &input, r, point, gap),
        Command::Dsvd { input, r, dir, out } => commands::dsvd(&g, &input, r, &dir, out),
        Command::Curvature {
            point,
            normal,
            project,
            out,
        } => commands::curvature(&g, &point, &normal, project, out),
        Command::Geodesic {
            point,
            tangent,
            steps,
            end,
            csv,
        } => commands::geodesic(&g, &point, &tangent, steps, end, csv),
        Command::DoRun { descriptor } => commands::do_run(&g, &descriptor),
        Command::TrackSvd {
            a,
            b,
            path,
            c,
            r,
            t0,
            t1,
            dt,
            out,
            end,
        } => {
            let kind = match path {
                TrackPath::Linear => PathKind::Linear,
                TrackPath::Exp => PathKind::Exp(c),
            };
            commands::track_svd(&g, &a, b.as_deref(), kind, r, (t0, t1, dt), out, end)
        }
        Command::Optimize {
            target,
            r,
            method,
            step,
            max_iters,
            grad_tol,
            init,
            trace,
            point,
        } => {
            let method: Method = method.parse().map_err(|e: lowrank::Error| Failure::usage(e.to_string()))?;
            let step: StepRule = commands::parse_step_rule(&step).map_err(Failure::usage)?;
            commands::optimize(
                &g,
                OptimizeArgs {
                    target,
                    r,
                    method,
                    step,
                    max_iters,
                    grad_tol,
                    init,
                    trace,
                    point,
                },
            )
        }
        Command::Experiment { recipe, set } => experiment::run(&g, &recipe, &set),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { failure::EXIT_PRECONDITION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = run(cli);
    commands::stdout_flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code)
        }
    }
}
