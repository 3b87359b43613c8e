//! Command-line driver for the `lmshoot` radial shooting solver.
//!
//! Commands: `solve`, `scan`, `eigen`, `verify`, `threshold`. Options come
//! from an optional JSON config (`--config`), overridden by flags. Exit codes:
//! 0 on success, 1 for invalid input, 2 for numerical failure (including
//! failed checks).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::Execution;
pub use config::{Overrides, Precision, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<lmshoot::Error> for CliError {
    fn from(e: lmshoot::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lmshoot", version, about = "Radial Neumann solutions of the Lorentz-Minkowski mean curvature equation by shooting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find every branch and write branches.json, scan.csv and branch_*.csv.
    Solve(SolveArgs),
    /// Tabulate half-turns and v(R) against the initial datum into scan.csv.
    Scan(ScanArgs),
    /// Radial Neumann eigenvalues into eigen.json.
    Eigen(EigenArgs),
    /// Run the check suite into verify.json; exit 0 iff all checks pass.
    Verify(VerifyArgs),
    /// Empirical threshold radius for k into threshold.json.
    Threshold(ThresholdArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Space dimension.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Ball radius.
    #[arg(long = "R")]
    pub r: Option<f64>,
    /// Nonlinearity: cubic_pinned or power,q=VALUE.
    #[arg(long = "f")]
    pub f: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// Number of half-turn levels.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Lower end of the scanned data; requires --d-hi.
    #[arg(long, requires = "d_hi")]
    pub d_lo: Option<f64>,
    #[arg(long, requires = "d_lo")]
    pub d_hi: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EigenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of eigenvalues.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Check name or `all`; may be repeated.
    #[arg(long)]
    pub check: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest radius tried; the pattern must hold there.
    #[arg(long)]
    pub r_max: Option<f64>,
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Solve(a) => &a.common,
            Command::Scan(a) => &a.common,
            Command::Eigen(a) => &a.common,
            Command::Verify(a) => &a.common,
            Command::Threshold(a) => &a.common,
        }
    }

    fn overrides(&self) -> Overrides {
        let c = self.common();
        let mut o = Overrides {
            dimension: c.n,
            radius: c.r,
            nonlinearity: c.f.clone(),
            out: c.out.clone(),
            jobs: c.jobs,
            seed: c.seed,
            rtol: c.rtol,
            atol: c.atol,
            precision: c.precision,
            k: c.k,
            ..Overrides::default()
        };
        match self {
            Command::Scan(a) => {
                if let (Some(lo), Some(hi)) = (a.d_lo, a.d_hi) {
                    o.d_range = Some([lo, hi]);
                }
            }
            Command::Eigen(a) => o.eigen_count = a.count,
            Command::Verify(a) if !a.check.is_empty() => o.checks = Some(a.check.clone()),
            Command::Threshold(a) => o.r_max = a.r_max,
            _ => {}
        }
        o
    }
}

/// Loads, merges and validates the configuration of a parsed command line.
pub fn resolve_config(cmd: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &cmd.common().config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cmd.overrides())?;
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch<T: lmshoot::Real>(cmd: &Command, cfg: &RunConfig) -> Result<Execution, CliError> {
    match cmd {
        Command::Solve(_) => commands::solve::<T>(cfg),
        Command::Scan(_) => commands::scan_cmd::<T>(cfg),
        Command::Eigen(_) => commands::eigen::<T>(cfg),
        Command::Verify(_) => commands::verify::<T>(cfg),
        Command::Threshold(_) => commands::threshold::<T>(cfg),
    }
}

/// Runs a validated configuration without writing anything.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Execution, CliError> {
    let run = || match cfg.precision {
        Precision::Double => dispatch::<f64>(cmd, cfg),
        Precision::DoubleDouble => dispatch::<lmshoot::DoubleDouble>(cmd, cfg),
    };
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Writes the files of an execution into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, ex: &Execution) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &ex.files {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

/// Parses, validates, runs and writes; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve_config(&cli.command).and_then(|cfg| {
        let ex = execute(&cli.command, &cfg)?;
        write_outputs(&cfg.out, &ex)?;
        Ok(ex)
    });
    match result {
        Ok(ex) => {
            print!("{}", ex.stdout);
            if ex.success {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
