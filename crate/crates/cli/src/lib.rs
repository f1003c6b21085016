//! `crm` command line: run a solver, compare methods, plot traces.
//!
//! Exit codes: 0 success, 1 solver error or failed comparison row, 2 iteration
//! cap reached, 3 cycle detected, 64 invalid configuration, 65 unreadable input.

pub mod plot;
pub mod trace_io;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use crm_core::analysis::{classify_rate, compare, ComparisonRow};
use crm_core::problems::{builtin, Problem, CATALOG};
use crm_core::{Method, Point, StopReason, StopRule, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_CYCLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_DATA,
            CliError::Output(_) => EXIT_FAILURE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "crm", version, about = "Projection and reflection solvers for two-set feasibility problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one method and write its trace.
    Run(RunArgs),
    /// Run several methods on one problem and tabulate the results.
    Compare(CompareArgs),
    /// Draw trace files as an SVG figure.
    Plot(PlotArgs),
    /// List the builtin problems.
    ListProblems(ListArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ProblemArgs {
    /// Builtin problem name, see `crm list-problems`.
    #[arg(long)]
    pub problem: Option<String>,
    /// JSON problem definition.
    #[arg(long)]
    pub problem_file: Option<PathBuf>,
}

impl ProblemArgs {
    fn load(&self) -> Result<Problem, CliError> {
        match (&self.problem, &self.problem_file) {
            (Some(name), _) => builtin(name).map_err(config),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
                Problem::from_json(&text).map_err(|e| config(format!("{}: {e}", path.display())))
            }
            (None, None) => Err(config("no problem given")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Starting point as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Residual tolerance `max(d_A, d_B)` for stopping.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Threshold on `1 - |cos|` below which a triple counts as colinear.
    #[arg(long, default_value_t = 1e-9)]
    pub eps_colinear: f64,
}

impl SolveArgs {
    fn settings(&self) -> Result<(StopRule, Tolerances), CliError> {
        let stop = StopRule {
            residual_tol: self.tol,
            max_iter: self.max_iter,
            ..StopRule::default()
        };
        let tol = Tolerances {
            colinearity_eps: self.eps_colinear,
            residual_tol: self.tol,
            ..Tolerances::default()
        };
        stop.validate().map_err(config)?;
        tol.validate().map_err(config)?;
        Ok((stop, tol))
    }

    fn start(&self, problem: &Problem) -> Result<Option<Point>, CliError> {
        let Some(text) = &self.x0 else { return Ok(None) };
        let coords = text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| config(format!("bad --x0 coordinate '{s}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        let x = Point::new(coords).map_err(config)?;
        if x.dim() != problem.a().dim() {
            return Err(config(format!("--x0 has {} coordinates, problem needs {}", x.dim(), problem.a().dim())));
        }
        Ok(Some(x))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Trace destination; without it only the summary line is printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated method ids.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "dr,crm,newton")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Table destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Trace files written by `crm run`.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.trim().parse::<Method>().map_err(|e| e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn stop_exit_code(reason: &StopReason) -> i32 {
    match reason {
        StopReason::ResidualMet => EXIT_OK,
        StopReason::MaxIter => EXIT_MAX_ITER,
        StopReason::Cycle { .. } => EXIT_CYCLE,
        StopReason::Error { .. } => EXIT_FAILURE,
    }
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let problem = args.problem.load()?;
    let (stop, tol) = args.solve.settings()?;
    let x0 = args.solve.start(&problem)?;
    let trace = problem.solve(args.method, x0.as_ref(), &stop, &tol).map_err(config)?;

    let rate = problem
        .nearest_solution(trace.last())
        .and_then(|s| classify_rate(&trace, s).ok())
        .map_or_else(|| "n/a".to_string(), |r| r.to_string());
    writeln!(
        stdout,
        "problem={} method={} stop={} iterations={} final_residual={:.3e} rate={rate}",
        problem.name(),
        trace.method,
        trace.stop_reason,
        trace.iterations(),
        trace.final_residual(),
    )?;

    if let Some(path) = &args.out {
        let mut out = create(path)?;
        match args.format {
            Format::Csv => trace_io::write_csv(&mut out, &problem, &trace)?,
            Format::Json => trace_io::write_json(&mut out, &problem, &trace)?,
        }
        out.flush()?;
    }
    Ok(stop_exit_code(&trace.stop_reason))
}

fn write_table(out: &mut dyn Write, rows: &[ComparisonRow], format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(ComparisonRow::HEADER)?;
            for r in rows {
                w.write_record(r.record())?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, rows).map_err(|e| CliError::Output(e.to_string()))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let problem = args.problem.load()?;
    let (stop, tol) = args.solve.settings()?;
    let problem = match args.solve.start(&problem)? {
        Some(x0) => with_start(&problem, &x0)?,
        None => problem,
    };
    let rows = compare(&problem, &args.methods, &stop, &tol).map_err(config)?;
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_table(&mut out, &rows, args.format)?;
            out.flush()?;
        }
        None => write_table(stdout, &rows, args.format)?,
    }
    Ok(if rows.iter().any(ComparisonRow::failed) { EXIT_FAILURE } else { EXIT_OK })
}

/// Same problem with a different default start.
fn with_start(problem: &Problem, x0: &Point) -> Result<Problem, CliError> {
    let mut v: serde_json::Value = serde_json::from_str(&problem.to_json()).map_err(config)?;
    v["x0"] = serde_json::to_value(x0).map_err(config)?;
    Problem::from_json(&v.to_string()).map_err(config)
}

pub fn cmd_plot(args: &PlotArgs) -> Result<i32, CliError> {
    let mut traces = Vec::with_capacity(args.traces.len());
    for path in &args.traces {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let file = trace_io::parse_trace(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if file.rows.is_empty() {
            return Err(CliError::Input(format!("{}: trace has no iterates", path.display())));
        }
        traces.push((path, file));
    }
    let labelled: Vec<(String, trace_io::TraceFile)> = traces
        .iter()
        .map(|(path, f)| {
            let dup = traces.iter().filter(|(_, g)| g.method == f.method).count() > 1;
            let label = if dup {
                let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                format!("{} ({stem})", f.method)
            } else {
                f.method.clone()
            };
            (label, f.clone())
        })
        .collect();
    let svg = plot::render(&labelled);
    let mut out = create(&args.out)?;
    out.write_all(svg.as_bytes())?;
    out.flush()?;
    Ok(EXIT_OK)
}

pub fn cmd_list(args: &ListArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let problems = CATALOG.iter().map(|n| builtin(n).map_err(config)).collect::<Result<Vec<_>, _>>()?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *stdout, &problems).map_err(|e| CliError::Output(e.to_string()))?;
            writeln!(stdout)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout);
            w.write_record(["name", "a", "b", "solutions", "x0", "case"])?;
            for p in &problems {
                let kind = |s: &crm_core::FeasibleSet| match s {
                    crm_core::FeasibleSet::Hyperplane(_) => "hyperplane",
                    crm_core::FeasibleSet::Graph(_) => "graph",
                    crm_core::FeasibleSet::Sphere(_) => "sphere",
                };
                let sols: Vec<String> = p.known_solutions().iter().map(Point::to_string).collect();
                let case = p
                    .case_label()
                    .map(|c| serde_json::to_value(c).ok().and_then(|v| v["case"].as_str().map(String::from)).unwrap_or_default())
                    .unwrap_or_default();
                w.write_record([
                    p.name(),
                    kind(p.a()),
                    kind(p.b()),
                    &sols.join(" "),
                    &p.default_x0().to_string(),
                    &case,
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(EXIT_OK)
}

/// Parse `args` and dispatch; returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Compare(a) => cmd_compare(a, stdout),
        Command::Plot(a) => cmd_plot(a),
        Command::ListProblems(a) => cmd_list(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "crm: {e}");
            e.exit_code()
        }
    }
}
