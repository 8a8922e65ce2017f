//! Command-line interface to the adapted Bures-Wasserstein library.
//!
//! Subcommands: `dist`, `geodesic`, `log`, `exp`, `verify`. All reports go
//! to stdout as JSON with sorted keys and shortest-round-trip floats, so
//! identical inputs and seeds produce byte-identical output; diagnostics
//! go to stderr. Exit codes: 0 success, 2 input error, 3 precondition
//! error, 4 verification failure.

mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abw_core::oracle::{
    exhaustive_distance_d1, finite_difference_angle, monte_carlo_coupling, random_search_distance,
    OracleReport,
};
use abw_core::{
    abw_distance, aw_gaussian_distance, exp_map, geodesic, is_regular, log_map, optimizer_set,
    BlockShape,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

use io::{float_value, load_mean, map_core_error, matrix_csv, matrix_value, Kind, MatrixFile};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn new(message: String, code: u8) -> Self {
        Self { message, code }
    }

    pub fn input(message: String) -> Self {
        Self::new(message, 2)
    }

    pub fn precondition(message: String) -> Self {
        Self::new(message, 3)
    }

    pub fn verification(message: String) -> Self {
        Self::new(message, 4)
    }
}

#[derive(Parser)]
#[command(
    name = "abw",
    about = "Adapted Bures-Wasserstein distances, geodesics, and verification oracles \
             over JSON matrix files",
    version
)]
struct Cli {
    /// Relative tolerance for rank decisions and structural checks.
    #[arg(long, global = true, env = "ABW_DEFAULT_TOL", default_value_t = 1e-9)]
    tol: f64,

    /// Seed for randomized oracles.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Emit matrices as CSV rows instead of JSON (log, exp, geodesic).
    #[arg(long, global = true, default_value_t = false)]
    csv: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two factors (or covariances), with the per-block
    /// singular structure and the canonical optimizer.
    Dist(DistArgs),
    /// Sample a geodesic between two factors.
    Geodesic(GeodesicArgs),
    /// Logarithmic map: initial velocity toward a target, with the
    /// uniqueness verdict.
    Log(LogArgs),
    /// Exponential map: follow a tangent direction for a given radius.
    Exp(ExpArgs),
    /// Run a verification oracle against the closed forms.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DistArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    mean_left: Option<PathBuf>,
    #[arg(long)]
    mean_right: Option<PathBuf>,
}

#[derive(Args)]
struct GeodesicArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    /// Number of segments; the output holds K+1 points.
    #[arg(long)]
    steps: usize,
    /// Write point files plus a manifest into this directory instead of
    /// emitting everything on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LogArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    tangent: PathBuf,
    #[arg(long)]
    radius: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    /// One of: exhaustive, random, mc, angle.
    #[arg(long)]
    oracle: String,
    /// Sample count for the random and mc oracles.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Means for the mc oracle (default: centered).
    #[arg(long)]
    mean_left: Option<PathBuf>,
    #[arg(long)]
    mean_right: Option<PathBuf>,
    /// Explicit coupling for the mc oracle (default: canonical optimizer).
    #[arg(long)]
    coupling: Option<PathBuf>,
    /// Second tangent direction for the angle oracle (default: the log
    /// direction toward --right, so alpha is identically 1).
    #[arg(long)]
    tangent_w: Option<PathBuf>,
}

fn emit(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable report")
    );
}

fn load_factor(
    path: &Path,
    tol: f64,
) -> Result<(abw_core::BlockLowerTriangular, BlockShape), CliError> {
    let file = MatrixFile::load(path, tol)?;
    let shape = file.shape;
    let factor = file.as_factor(path, tol)?;
    Ok((factor, shape))
}

fn cmd_dist(args: &DistArgs, tol: f64) -> Result<(), CliError> {
    let (left, _) = load_factor(&args.left, tol)?;
    let (right, _) = load_factor(&args.right, tol)?;

    let oset = optimizer_set(&left, &right, tol).map_err(map_core_error)?;
    let per_block: Vec<Value> = (0..left.shape().time_steps())
        .map(|t| {
            json!({
                "t": t + 1,
                "singular_values": oset
                    .singular_values(t)
                    .iter()
                    .map(|&s| Value::from(s))
                    .collect::<Vec<_>>(),
                "rank": oset.rank(t),
            })
        })
        .collect();
    let canonical = oset.canonical_member();

    let distance = match (&args.mean_left, &args.mean_right) {
        (None, None) => abw_distance(&left, &right, tol).map_err(map_core_error)?,
        (Some(a_path), Some(b_path)) => {
            let a = load_mean(a_path, left.shape())?;
            let b = load_mean(b_path, right.shape())?;
            aw_gaussian_distance(&a, &left, &b, &right, tol).map_err(map_core_error)?
        }
        _ => {
            return Err(CliError::input(
                "provide both --mean-left and --mean-right or neither".into(),
            ))
        }
    };

    emit(&json!({
        "distance": distance,
        "distance_squared": distance * distance,
        "per_block": per_block,
        "optimizer_canonical": matrix_value(
            left.shape(),
            Kind::BlockOrthogonal,
            &canonical.to_matrix()
        ),
    }));
    Ok(())
}

fn cmd_geodesic(args: &GeodesicArgs, tol: f64, csv: bool) -> Result<(), CliError> {
    if args.steps == 0 {
        return Err(CliError::input("--steps must be at least 1".into()));
    }
    let (left, shape) = load_factor(&args.left, tol)?;
    let (right, _) = load_factor(&args.right, tol)?;

    let seg = geodesic(&left, &right, tol).map_err(map_core_error)?;
    let unique = log_map(&left, &right, tol).map_err(map_core_error)?.unique;
    let k = args.steps;

    let mut points = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let u = i as f64 / k as f64;
        let pt = seg.point(u);
        let dist = abw_distance(&left, &pt, tol).map_err(map_core_error)?;
        let regular = is_regular(&pt, tol).map_err(map_core_error)?;
        points.push((u, pt, dist, regular));
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        let mut manifest_points = Vec::new();
        for (i, (u, pt, dist, regular)) in points.iter().enumerate() {
            let name = format!("point_{i:03}.json");
            let value = matrix_value(shape, Kind::LowerTriangular, pt.as_matrix());
            fs::write(
                dir.join(&name),
                serde_json::to_string_pretty(&value).expect("serializable matrix"),
            )
            .map_err(|e| CliError::input(format!("cannot write {name}: {e}")))?;
            manifest_points.push(json!({
                "u": u,
                "file": name,
                "distance_from_start": dist,
                "regular": regular,
            }));
        }
        let manifest = json!({
            "distance": seg.length(),
            "unique": unique,
            "points": manifest_points,
        });
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).expect("serializable manifest"),
        )
        .map_err(|e| CliError::input(format!("cannot write manifest: {e}")))?;
        emit(&json!({ "out": dir.display().to_string(), "points": k + 1 }));
    } else if csv {
        for (_, pt, _, _) in &points {
            print!("{}", matrix_csv(pt.as_matrix()));
            println!();
        }
    } else {
        let point_values: Vec<Value> = points
            .iter()
            .map(|(u, pt, dist, regular)| {
                json!({
                    "u": u,
                    "matrix": matrix_value(shape, Kind::LowerTriangular, pt.as_matrix()),
                    "distance_from_start": dist,
                    "regular": regular,
                })
            })
            .collect();
        emit(&json!({
            "distance": seg.length(),
            "unique": unique,
            "points": point_values,
        }));
    }
    Ok(())
}

fn cmd_log(args: &LogArgs, tol: f64, csv: bool) -> Result<(), CliError> {
    let (base, shape) = load_factor(&args.base, tol)?;
    let (target, _) = load_factor(&args.target, tol)?;
    let log = log_map(&base, &target, tol).map_err(map_core_error)?;
    if csv {
        print!("{}", matrix_csv(log.tangent.direction().as_matrix()));
        return Ok(());
    }
    emit(&json!({
        "tangent": matrix_value(shape, Kind::LowerTriangular, log.tangent.direction().as_matrix()),
        "unique": log.unique,
        "marginal": log.marginal,
        "optimizer_used": matrix_value(
            shape,
            Kind::BlockOrthogonal,
            &log.optimizer_used.to_matrix()
        ),
    }));
    Ok(())
}

fn cmd_exp(args: &ExpArgs, tol: f64, csv: bool) -> Result<(), CliError> {
    let (base, shape) = load_factor(&args.base, tol)?;
    let tangent_file = MatrixFile::load(&args.tangent, tol)?;
    let tangent = tangent_file.as_factor(&args.tangent, tol)?;
    if !args.radius.is_finite() || args.radius < 0.0 {
        return Err(CliError::input(format!(
            "--radius must be finite and nonnegative, got {}",
            args.radius
        )));
    }
    let res = exp_map(&base, &tangent, args.radius, tol).map_err(map_core_error)?;
    if csv {
        print!("{}", matrix_csv(res.point.as_matrix()));
        return Ok(());
    }
    emit(&json!({
        "point": matrix_value(shape, Kind::LowerTriangular, res.point.as_matrix()),
        "safe_radius": float_value(res.safe_radius),
        "within_safe_radius": res.within_safe_radius,
    }));
    Ok(())
}

fn report_value(report: &OracleReport, pass: bool) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("closed_form".into(), Value::from(report.closed_form));
    obj.insert("oracle_value".into(), Value::from(report.oracle_value));
    obj.insert("gap".into(), Value::from(report.gap));
    obj.insert(
        "samples_or_states".into(),
        Value::from(report.samples_or_states),
    );
    obj.insert("seed".into(), Value::from(report.seed));
    if let Some(stderr) = report.stderr {
        obj.insert("stderr".into(), Value::from(stderr));
    }
    if let Some(v) = report.monotonicity_violations {
        obj.insert("monotonicity_violations".into(), Value::from(v));
    }
    obj.insert("pass".into(), Value::from(pass));
    Value::Object(obj)
}

fn cmd_verify(args: &VerifyArgs, tol: f64, seed: u64) -> Result<(), CliError> {
    let (left, shape) = load_factor(&args.left, tol)?;
    let (right, _) = load_factor(&args.right, tol)?;

    let (report, pass) = match args.oracle.as_str() {
        "exhaustive" => {
            let report = exhaustive_distance_d1(&left, &right).map_err(map_core_error)?;
            let pass = report.gap <= 1e-10 * (1.0 + report.closed_form);
            (report, pass)
        }
        "random" => {
            let report = random_search_distance(&left, &right, args.samples, seed)
                .map_err(map_core_error)?;
            let pass = report.gap <= 1e-10 * (1.0 + report.closed_form)
                && report.oracle_value >= report.closed_form - 1e-10;
            (report, pass)
        }
        "mc" => {
            let a = match &args.mean_left {
                Some(p) => load_mean(p, shape)?,
                None => DVector::zeros(shape.dim()),
            };
            let b = match &args.mean_right {
                Some(p) => load_mean(p, shape)?,
                None => DVector::zeros(shape.dim()),
            };
            let p = match &args.coupling {
                Some(path) => {
                    let file = MatrixFile::load(path, tol)?;
                    file.as_block_orthogonal(path, tol)?
                }
                None => optimizer_set(&left, &right, tol)
                    .map_err(map_core_error)?
                    .canonical_member(),
            };
            let report =
                monte_carlo_coupling(&a, &left, &b, &right, &p, args.samples.max(100), seed)
                    .map_err(map_core_error)?;
            let stderr = report.stderr.unwrap_or(0.0);
            let pass = if stderr > 0.0 {
                report.gap <= 5.0 * stderr
            } else {
                report.gap <= 1e-12 * (1.0 + report.closed_form)
            };
            (report, pass)
        }
        "angle" => {
            let log = log_map(&left, &right, tol).map_err(map_core_error)?;
            let v = log.tangent.direction().clone();
            let w = match &args.tangent_w {
                Some(path) => {
                    let file = MatrixFile::load(path, tol)?;
                    file.as_factor(path, tol)?
                }
                None => v.clone(),
            };
            if v.frobenius_norm() == 0.0 {
                return Err(CliError::precondition(
                    "angle oracle needs a nonzero log direction (base differs from target)".into(),
                ));
            }
            let grid = [1.0, 0.5, 0.25, 0.1, 0.05, 1e-2, 1e-3, 1e-4];
            let report =
                finite_difference_angle(&left, &v, &w, &grid, tol).map_err(map_core_error)?;
            let pass = report.monotonicity_violations == Some(0) && report.gap <= 1e-3;
            (report, pass)
        }
        other => {
            return Err(CliError::input(format!(
                "unknown oracle {other:?} (expected exhaustive, random, mc, or angle)"
            )))
        }
    };

    emit(&report_value(&report, pass));
    if !pass {
        return Err(CliError::verification(format!(
            "oracle {} disagrees with the closed form: oracle = {}, closed form = {}, gap = {}",
            args.oracle, report.oracle_value, report.closed_form, report.gap
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return Err(CliError::input(format!(
            "--tol must lie in (0, 1), got {}",
            cli.tol
        )));
    }
    match &cli.command {
        Command::Dist(args) => cmd_dist(args, cli.tol),
        Command::Geodesic(args) => cmd_geodesic(args, cli.tol, cli.csv),
        Command::Log(args) => cmd_log(args, cli.tol, cli.csv),
        Command::Exp(args) => cmd_exp(args, cli.tol, cli.csv),
        Command::Verify(args) => cmd_verify(args, cli.tol, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
