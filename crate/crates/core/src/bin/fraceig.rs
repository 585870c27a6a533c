//! Command-line front end: eigen solves, parameter sweeps toward the two
//! limits, and viscosity residual reports, with JSON/CSV/SVG artifacts.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 solver failure,
//! 3 sweep with more than half of its records failed.

// Grid validation uses `!(p > 1.0)` so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fraceig::asymptotics::{self, SweepResult};
use fraceig::config::{
    parse_metric, validate_grid, DomainSection, DomainSpec, ParamsSection,
    RunConfig, SolverSection,
};
use fraceig::eigensolve::{self, FracParams};
use fraceig::geometry::GridFunction;
use fraceig::holder;
use fraceig::output::{self, EigenDocument};
use fraceig::{Domain, Error};

#[derive(Parser)]
#[command(
    name = "fraceig",
    version,
    about = "First non-zero Neumann eigenvalue of the regional fractional p-Laplacian",
    after_help = "Thread count: --threads or the FRACEIG_THREADS environment variable."
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker thread count (results are identical for any value).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the eigenpair at fixed (s, p).
    Eigen(EigenArgs),
    /// Sweep s toward 1 at fixed p, tracking K(1-s)*lambda.
    SweepS(SweepSArgs),
    /// Sweep p upward at fixed s, tracking lambda^(1/p).
    SweepP(SweepPArgs),
    /// Evaluate Holder infinity-Laplacian viscosity residuals of a stored
    /// eigenpair.
    Viscosity(ViscosityArgs),
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// Domain spec: interval:a,b,n | rectangle:ax,bx,ay,by,nx,ny | lshape:side,n
    #[arg(long, value_name = "SPEC")]
    domain: Option<String>,

    /// Distance metric: euclidean | geodesic
    #[arg(long, value_name = "KIND")]
    metric: Option<String>,

    /// Neighbor count for the geodesic graph (default 8).
    #[arg(long, value_name = "K")]
    knn: Option<usize>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative eigenvalue tolerance for the general-p solver.
    #[arg(long)]
    tol: Option<f64>,

    /// Iteration cap for the general-p solver.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct EigenArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Fractional order, in (0, 1).
    #[arg(long)]
    s: Option<f64>,
    /// Integrability exponent, greater than 1.
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Eigenpair document path (default eigen.json).
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Eigenfunction table path (default eigenfunction.csv).
    #[arg(long, value_name = "FILE")]
    function_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepSArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Integrability exponent, greater than 1.
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated, strictly increasing s values.
    #[arg(long, value_name = "S1,S2,...", value_delimiter = ',')]
    s_grid: Option<Vec<f64>>,
    /// Known limit for the error columns: a number, or pi2 for pi^2.
    #[arg(long, value_name = "VALUE")]
    reference: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: SweepOutArgs,
}

#[derive(Args)]
struct SweepPArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Fractional order, in (0, 1).
    #[arg(long)]
    s: Option<f64>,
    /// Comma-separated, strictly increasing p values.
    #[arg(long, value_name = "P1,P2,...", value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: SweepOutArgs,
}

#[derive(Args, Clone)]
struct SweepOutArgs {
    /// Sweep result document (default sweep_s.json / sweep_p.json).
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Sweep table (default sweep_s.csv / sweep_p.csv).
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Optional SVG line plot of the scaled quantity.
    #[arg(long, value_name = "FILE")]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct ViscosityArgs {
    /// Eigenpair document produced by the eigen subcommand.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Eigenvalue for the residuals: a number, or auto for 2/diam^s.
    #[arg(long, default_value = "auto", value_name = "VALUE")]
    lambda: String,
    /// Report document path (default viscosity.json).
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Per-node table path (default viscosity.csv).
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

/// Failure that already knows its process exit code.
struct Failure {
    code: u8,
    error: Error,
}

type CmdResult = Result<u8, Failure>;

trait Phase<T> {
    /// Configuration or input handling: failures exit 1.
    fn config_phase(self) -> Result<T, Failure>;
    /// Solver phase: failures exit 2.
    fn solver_phase(self) -> Result<T, Failure>;
}

impl<T> Phase<T> for Result<T, Error> {
    fn config_phase(self) -> Result<T, Failure> {
        self.map_err(|error| Failure { code: 1, error })
    }

    fn solver_phase(self) -> Result<T, Failure> {
        self.map_err(|error| Failure { code: 2, error })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };

    let result = (|| -> CmdResult {
        let file = match &cli.config {
            Some(path) => RunConfig::from_file(path).config_phase()?,
            None => RunConfig::default(),
        };
        setup_threads(cli.threads.or(file.solver.threads)).config_phase()?;
        match cli.cmd {
            Cmd::Eigen(a) => cmd_eigen(a, &file),
            Cmd::SweepS(a) => cmd_sweep_s(a, &file),
            Cmd::SweepP(a) => cmd_sweep_p(a, &file),
            Cmd::Viscosity(a) => cmd_viscosity(a, &file),
        }
    })();

    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.error);
            if f.code == 1 {
                eprintln!("usage: fraceig <eigen|sweep-s|sweep-p|viscosity> [options]; see fraceig help <subcommand>");
            }
            ExitCode::from(f.code)
        }
    }
}

fn setup_threads(flag: Option<usize>) -> Result<(), Error> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("FRACEIG_THREADS") {
            Ok(text) => Some(text.parse::<usize>().map_err(|_| {
                Error::Config(format!("FRACEIG_THREADS must be a positive integer, got {text:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn require<T>(value: Option<T>, flag: &str, file_key: &str) -> Result<T, Error> {
    value.ok_or_else(|| {
        Error::Config(format!("missing {flag} (set the flag or {file_key} in the config file)"))
    })
}

fn resolve_domain(args: &DomainArgs, file: &DomainSection) -> Result<Domain, Error> {
    let text = require(
        args.domain.clone().or_else(|| file.shape.clone()),
        "--domain",
        "[domain].shape",
    )?;
    let spec: DomainSpec = text.parse()?;
    let metric = parse_metric(
        args.metric
            .as_deref()
            .or(file.metric.as_deref())
            .unwrap_or("euclidean"),
    )?;
    let knn = args.knn.or(file.knn).unwrap_or(8);
    spec.build_with_metric(metric, knn)
}

fn resolve_params(
    s: Option<f64>,
    p: Option<f64>,
    solver: &SolverArgs,
    file: &ParamsSection,
    file_solver: &SolverSection,
) -> Result<FracParams, Error> {
    let s = require(s.or(file.s), "--s", "[params].s")?;
    let p = require(p.or(file.p), "--p", "[params].p")?;
    let mut params = FracParams::new(s, p)?;
    if let Some(tol) = solver.tol.or(file_solver.tol) {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {tol}")));
        }
        params.tol = tol;
    }
    if let Some(mi) = solver.max_iter.or(file_solver.max_iter) {
        if mi == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        params.max_iter = mi;
    }
    Ok(params)
}

fn parse_reference(text: &str) -> Result<f64, Error> {
    match text {
        "pi2" | "pi^2" => Ok(std::f64::consts::PI.powi(2)),
        other => other
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("reference must be a number or pi2, got {other:?}"))),
    }
}

fn out_path(flag: Option<PathBuf>, file: &Option<String>, default: &str) -> PathBuf {
    flag.or_else(|| file.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default))
}

fn cmd_eigen(args: EigenArgs, file: &RunConfig) -> CmdResult {
    let dom = resolve_domain(&args.domain, &file.domain).config_phase()?;
    let params = resolve_params(args.s, args.p, &args.solver, &file.params, &file.solver)
        .config_phase()?;

    let pair = if params.p == 2.0 {
        eigensolve::solve_p2(&dom, params.s)
    } else if params.p > 16.0 {
        // Cold starts at large p tend to land on nearby critical points
        // above the minimum; continuation along doubling p values tracks
        // the minimizing branch.
        let mut seed = None;
        let mut q = 4.0;
        while q < params.p {
            let stage = FracParams {
                p: q,
                ..params
            };
            match eigensolve::solve_general(&dom, &stage, seed.as_ref()) {
                Ok(pair) => seed = Some(pair.u),
                Err(e) => eprintln!("warning: continuation stage p = {q}: {e}"),
            }
            q *= 2.0;
        }
        eigensolve::solve_general(&dom, &params, seed.as_ref())
    } else {
        eigensolve::solve_general(&dom, &params, None)
    }
    .solver_phase()?;
    if !pair.converged {
        return Err(Failure {
            code: 2,
            error: Error::NoConvergence {
                iterations: pair.iterations,
                residual: pair.constraint_residual,
            },
        });
    }

    let json_path = out_path(args.json, &file.output.json, "eigen.json");
    let csv_path = out_path(
        args.function_csv,
        &file.output.function_csv,
        "eigenfunction.csv",
    );
    let doc = EigenDocument::new(&dom, params.s, params.p, &pair).config_phase()?;
    output::write_json(&json_path, &doc).config_phase()?;
    output::atomic_write(&csv_path, output::eigenfunction_csv(&dom, &pair.u).as_bytes())
        .config_phase()?;

    println!(
        "lambda = {:.12e}  (s = {}, p = {}, N = {}, {} iterations)",
        pair.lambda,
        params.s,
        params.p,
        dom.len(),
        pair.iterations
    );
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(0)
}

/// Shared tail of the two sweep commands: emit warnings, artifacts and the
/// partial-failure exit code.
#[allow(clippy::too_many_arguments)]
fn finish_sweep(
    result: &SweepResult,
    dom: &Domain,
    json_path: &Path,
    csv_path: &Path,
    plot: Option<&Path>,
    x_label: &str,
    title: &str,
    document: serde_json::Value,
) -> CmdResult {
    for f in &result.failures {
        eprintln!("warning: {x_label} = {}: {}", f.param, f.error);
    }
    output::write_json(json_path, &document).config_phase()?;
    output::atomic_write(csv_path, output::sweep_csv(result).as_bytes()).config_phase()?;
    let mut wrote = format!("wrote {} and {}", json_path.display(), csv_path.display());
    if let Some(plot_path) = plot {
        let svg = output::sweep_plot_svg(result, x_label, title);
        output::atomic_write(plot_path, svg.as_bytes()).config_phase()?;
        wrote = format!("{wrote} and {}", plot_path.display());
    }
    println!(
        "{} of {} records converged on {}; extrapolated = {:.8e}",
        result.records.len(),
        result.records.len() + result.failures.len(),
        dom.shape_string().unwrap_or("domain"),
        result.extrapolated
    );
    println!("{wrote}");
    if result.failures.len() * 2 > result.records.len() + result.failures.len() {
        Ok(3)
    } else {
        Ok(0)
    }
}

fn cmd_sweep_s(args: SweepSArgs, file: &RunConfig) -> CmdResult {
    let dom = resolve_domain(&args.domain, &file.domain).config_phase()?;
    let p = require(args.p.or(file.params.p), "--p", "[params].p").config_phase()?;
    let grid = require(
        args.s_grid.or_else(|| file.params.s_grid.clone()),
        "--s-grid",
        "[params].s_grid",
    )
    .config_phase()?;
    validate_grid(&grid, "s").config_phase()?;
    for &s in &grid {
        if !(s > 0.0 && s < 1.0) {
            return Err(Failure {
                code: 1,
                error: Error::Config(format!("s must lie in (0,1), got {s}")),
            });
        }
    }
    let reference = match args.reference.as_deref() {
        Some(text) => Some(parse_reference(text).config_phase()?),
        None => file.params.reference,
    };

    // The base s is a placeholder the sweep replaces with each grid value.
    let base = resolve_params(Some(grid[0]), Some(p), &args.solver, &file.params, &file.solver)
        .config_phase()?;

    // The grid is already validated, so an error here means every record
    // failed: that is the partial-failure exit, not a config error.
    let result = asymptotics::sweep_s(&dom, &base, &grid, reference)
        .map_err(|error| Failure { code: 3, error })?;

    let json_path = out_path(args.out.json, &file.output.json, "sweep_s.json");
    let csv_path = out_path(args.out.csv, &file.output.csv, "sweep_s.csv");
    let plot = args
        .out
        .plot
        .or_else(|| file.output.plot.as_ref().map(PathBuf::from));
    let title = format!(
        "K(1-s)*lambda_1(s,{p}) on {}",
        dom.shape_string().unwrap_or("domain")
    );
    let document = serde_json::json!({
        "domain": dom.shape_string(),
        "metric": dom.metric(),
        "p": p,
        "sweep": result,
    });
    finish_sweep(
        &result, &dom, &json_path, &csv_path, plot.as_deref(), "s", &title, document,
    )
}

fn cmd_sweep_p(args: SweepPArgs, file: &RunConfig) -> CmdResult {
    let dom = resolve_domain(&args.domain, &file.domain).config_phase()?;
    let s = require(args.s.or(file.params.s), "--s", "[params].s").config_phase()?;
    let grid = require(
        args.p_grid.or_else(|| file.params.p_grid.clone()),
        "--p-grid",
        "[params].p_grid",
    )
    .config_phase()?;
    validate_grid(&grid, "p").config_phase()?;
    for &p in &grid {
        if !(p > 1.0) {
            return Err(Failure {
                code: 1,
                error: Error::Config(format!("p must exceed 1, got {p}")),
            });
        }
    }

    // The base p is a placeholder the sweep replaces with each grid value.
    let base = resolve_params(Some(s), Some(grid[0]), &args.solver, &file.params, &file.solver)
        .config_phase()?;

    let result = asymptotics::sweep_p(&dom, &base, &grid).map_err(|error| Failure {
        code: 3,
        error,
    })?;

    let json_path = out_path(args.out.json, &file.output.json, "sweep_p.json");
    let csv_path = out_path(args.out.csv, &file.output.csv, "sweep_p.csv");
    let plot = args
        .out
        .plot
        .or_else(|| file.output.plot.as_ref().map(PathBuf::from));
    let title = format!(
        "lambda_1({s},p)^(1/p) on {}",
        dom.shape_string().unwrap_or("domain")
    );
    let document = serde_json::json!({
        "domain": dom.shape_string(),
        "metric": dom.metric(),
        "s": s,
        "sweep": result,
    });
    finish_sweep(
        &result, &dom, &json_path, &csv_path, plot.as_deref(), "p", &title, document,
    )
}

fn cmd_viscosity(args: ViscosityArgs, file: &RunConfig) -> CmdResult {
    let doc = EigenDocument::load(&args.input).config_phase()?;
    let dom = doc.build_domain().config_phase()?;
    if doc.u.len() != dom.len() {
        return Err(Failure {
            code: 1,
            error: Error::Config(format!(
                "eigenfunction length {} does not match domain size {}",
                doc.u.len(),
                dom.len()
            )),
        });
    }
    let u = GridFunction::new(doc.u.clone());
    let lambda = match args.lambda.as_str() {
        "auto" => holder::lambda_inf(&dom, doc.s),
        text => text.parse::<f64>().map_err(|_| Failure {
            code: 1,
            error: Error::Config(format!("lambda must be a number or auto, got {text:?}")),
        })?,
    };

    // Degenerate input (constant u, bad lambda) is an input error here, not
    // a solver failure.
    let report = holder::viscosity_residual(&dom, &u, doc.s, lambda).config_phase()?;

    let json_path = out_path(args.json, &file.output.json, "viscosity.json");
    let csv_path = out_path(args.csv, &file.output.csv, "viscosity.csv");
    let document = serde_json::json!({
        "domain": dom.shape_string(),
        "metric": dom.metric(),
        "s": doc.s,
        "p": doc.p,
        "lambda": lambda,
        "report": report,
    });
    output::write_json(&json_path, &document).config_phase()?;
    output::atomic_write(&csv_path, output::viscosity_csv(&dom, &u, &report).as_bytes())
        .config_phase()?;

    println!(
        "max residual = {:.6e}, fraction within tolerance = {:.4}",
        report.max_residual, report.fraction_within_tol
    );
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(0)
}
