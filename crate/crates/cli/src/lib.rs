//! Command-line front end: `solve`, `wasserstein`, `experiment`, `report` and
//! `selftest`.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible, 3 numerical failure.
//! All outputs are written under the output directory (`--out`, falling back
//! to `$DROLAB_OUT`, then `drolab-out`).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use drolab::config::{experiment_to_toml, load_distribution, load_experiment, load_problem};
use drolab::consistency::{
    analyze_experiment, read_traces_csv, run_experiment, write_aggregates_csv, write_traces_csv, ConsistencyReport,
    ExperimentConfig, ExperimentMode, ExperimentTrace,
};
use drolab::distributions::{wasserstein1_auto, AmbiguitySet};
use drolab::solvers::{
    solve_ccp_reference, solve_drccp, solve_drrcp_with, solve_rcp_reference_with, Diagnostics, EpigraphMethod,
    GridConfig, SolveResult, SolveStatus,
};

pub mod selftest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Input(drolab::Error),
    #[error("numerical failure: {0}")]
    Numerical(drolab::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

impl From<drolab::Error> for CliError {
    fn from(e: drolab::Error) -> Self {
        match e {
            drolab::Error::Solver(_) => Self::Numerical(e),
            e => Self::Input(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "drolab",
    version,
    about = "Wasserstein distributionally robust risk- and chance-constrained programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance against an empirical distribution.
    Solve(SolveArgs),
    /// Print the 1-Wasserstein (ℓ1) distance between two distribution CSVs.
    Wasserstein(WassersteinArgs),
    /// Run a consistency experiment and write traces and a report.
    Experiment(ExperimentArgs),
    /// Recompute the report of a finished experiment from its traces.
    Report(ReportArgs),
    /// Run the embedded property suite.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveMode {
    Rcp,
    Drrcp,
    Ccp,
    Drccp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Reformulation,
    CuttingPlane,
}

impl From<MethodArg> for EpigraphMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => EpigraphMethod::Auto,
            MethodArg::Reformulation => EpigraphMethod::Reformulation,
            MethodArg::CuttingPlane => EpigraphMethod::CuttingPlane,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory.
    #[arg(long, env = "DROLAB_OUT", default_value = "drolab-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem TOML file.
    #[arg(long)]
    pub problem: PathBuf,
    /// Distribution CSV (`w,xi_1,..,xi_m`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub mode: SolveMode,
    /// Wasserstein radius for the distributionally robust modes.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Replace the risk level from the problem file.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_override: Option<f64>,
    /// Epigraph solver for rcp/drrcp.
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    /// Initial grid points per axis for ccp/drccp.
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// Refinement rounds for ccp/drccp.
    #[arg(long)]
    pub grid_rounds: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment TOML file.
    pub config: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Replace `base_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `experiment`.
    #[arg(long)]
    pub from: PathBuf,
    /// Experiment TOML; defaults to the `config.toml` saved in `--from`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<u8> {
    match command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Wasserstein(a) => cmd_wasserstein(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Selftest => Ok(selftest::cmd_selftest()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(CliError::Usage("invalid value for --jobs: must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::NumericalFailure => EXIT_NUMERICAL,
    }
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<u8> {
    let theta = args.theta.unwrap_or(0.0);
    if !theta.is_finite() || theta < 0.0 {
        return Err(CliError::Usage(format!(
            "invalid value for --theta: {theta} (the radius must be finite and nonnegative)"
        )));
    }
    if theta > 0.0 && matches!(args.mode, SolveMode::Rcp | SolveMode::Ccp) {
        return Err(CliError::Usage(
            "--theta applies only to --mode drrcp or drccp; the reference modes use the data as given".into(),
        ));
    }
    let mut problem = load_problem(&args.problem)?;
    if let Some(alpha) = args.alpha_override {
        problem = problem
            .with_alpha(alpha)
            .map_err(|e| CliError::Usage(format!("invalid value for --alpha-override: {e}")))?;
    }
    let data = load_distribution(&args.data)?;
    data.check_support(&problem.support)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.data.display())))?;
    if data.dim() != problem.m() {
        return Err(CliError::Usage(format!(
            "{}: data dimension {} does not match the problem's uncertainty dimension {}",
            args.data.display(),
            data.dim(),
            problem.m()
        )));
    }
    let mut grid = GridConfig::for_dimension(problem.n());
    if let Some(r) = args.grid_resolution {
        grid.initial_resolution = r;
    }
    if let Some(r) = args.grid_rounds {
        grid.rounds = r;
    }
    if matches!(args.mode, SolveMode::Ccp | SolveMode::Drccp) {
        grid.validate()
            .map_err(|e| CliError::Usage(format!("invalid value for --grid-resolution: {e}")))?;
    }
    create_dir(&args.out.out)?;

    let method = EpigraphMethod::from(args.method);
    let outcome = match args.mode {
        SolveMode::Rcp => solve_rcp_reference_with(&problem, &data, method),
        SolveMode::Drrcp => AmbiguitySet::new(data, theta).and_then(|ball| solve_drrcp_with(&problem, &ball, method)),
        SolveMode::Ccp => solve_ccp_reference(&problem, &data, &grid),
        SolveMode::Drccp => AmbiguitySet::new(data, theta).and_then(|ball| solve_drccp(&problem, &ball, &grid)),
    };
    let result = match outcome {
        Ok(r) => r,
        Err(e @ drolab::Error::Solver(_)) => {
            eprintln!("error: {e}");
            let diagnostics = Diagnostics {
                warnings: vec![e.to_string()],
                ..Default::default()
            };
            SolveResult::failed(SolveStatus::NumericalFailure, diagnostics)
        }
        Err(e) => return Err(e.into()),
    };
    let path = args.out.out.join("result.json");
    let json = serde_json::to_string_pretty(&result).map_err(|e| CliError::Input(e.into()))?;
    write_file(&path, json + "\n")?;

    println!("status: {}", result.status.as_str());
    if result.is_optimal() {
        println!("J: {}", result.value);
        println!("x: {:?}", result.x);
        if let Some(t) = result.t {
            println!("t: {t}");
        }
    }
    for w in &result.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", path.display());
    Ok(status_code(result.status))
}

pub fn cmd_wasserstein(args: &WassersteinArgs) -> CliResult<u8> {
    let a = load_distribution(&args.a)?;
    let b = load_distribution(&args.b)?;
    if a.dim() != b.dim() {
        return Err(CliError::Usage(format!(
            "dimension mismatch: {} has {} coordinates, {} has {}",
            args.a.display(),
            a.dim(),
            args.b.display(),
            b.dim()
        )));
    }
    let d = wasserstein1_auto(&a, &b)?;
    println!("{:.9}", d.max(0.0));
    Ok(EXIT_OK)
}

fn traces_file(config: &ExperimentConfig, mode: ExperimentMode) -> String {
    if config.mode == ExperimentMode::Both {
        format!("traces_{}.csv", mode.label())
    } else {
        "traces.csv".to_string()
    }
}

fn write_reports(out: &Path, reports: &[ConsistencyReport]) -> CliResult<String> {
    let json = serde_json::to_string_pretty(reports).map_err(|e| CliError::Input(e.into()))?;
    write_file(&out.join("report.json"), json + "\n")?;
    let mut summary = String::new();
    for report in reports {
        let mut buf = Vec::new();
        write_aggregates_csv(report, &mut buf)?;
        write_file(&out.join(format!("aggregates_{}.csv", report.mode.label())), buf)?;
        summary.push_str(&report.summary());
        summary.push('\n');
    }
    Ok(summary)
}

fn cell_summary(traces: &[ExperimentTrace]) -> String {
    let count = |s: SolveStatus| traces.iter().filter(|t| t.status == s).count();
    format!(
        "cells: {} total, {} optimal, {} infeasible, {} numerical failures\n",
        traces.len(),
        count(SolveStatus::Optimal),
        count(SolveStatus::Infeasible),
        count(SolveStatus::NumericalFailure)
    )
}

pub fn cmd_experiment(args: &ExperimentArgs) -> CliResult<u8> {
    let mut config = load_experiment(&args.config)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    let pool = thread_pool(args.jobs)?;
    let out = &args.out.out;
    create_dir(out)?;
    write_file(&out.join("config.toml"), experiment_to_toml(&config)?)?;

    let (traces, reports) = pool.install(|| -> drolab::Result<_> {
        let traces = run_experiment(&config)?;
        let reports = analyze_experiment(&config, &traces)?;
        Ok((traces, reports))
    })?;
    for mode in config.mode.programs() {
        let subset: Vec<ExperimentTrace> = traces.iter().filter(|t| t.mode == mode).cloned().collect();
        let mut buf = Vec::new();
        write_traces_csv(&subset, config.problem.n(), &mut buf)?;
        write_file(&out.join(traces_file(&config, mode)), buf)?;
    }
    let mut summary = cell_summary(&traces);
    summary.push_str(&write_reports(out, &reports)?);
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("wrote {}", out.display());
    if traces.iter().all(|t| !t.is_optimal()) {
        eprintln!("error: every experiment cell failed");
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<u8> {
    let config_path = args.config.clone().unwrap_or_else(|| args.from.join("config.toml"));
    let config = load_experiment(&config_path)?;
    let mut traces = Vec::new();
    for mode in config.mode.programs() {
        let path = args.from.join(traces_file(&config, mode));
        let file = fs::File::open(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let mut part = read_traces_csv(file, mode).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        traces.append(&mut part);
    }
    let pool = thread_pool(args.jobs)?;
    let out = &args.out.out;
    create_dir(out)?;
    let reports = pool.install(|| analyze_experiment(&config, &traces))?;
    let mut summary = cell_summary(&traces);
    summary.push_str(&write_reports(out, &reports)?);
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}
