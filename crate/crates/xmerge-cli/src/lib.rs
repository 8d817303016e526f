//! Command-line front end: `merge`, `simulate`, `diff` and `pca`.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

use std::ffi::OsString;
use std::fmt;

use clap::{Args, Parser, Subcommand};
use xmerge::error::ErrorKind;

pub mod commands;
pub mod io;
pub mod params;

use params::LambdaArg;

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "XMERGE_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(xmerge::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Input => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => {
                let class = match e {
                    xmerge::Error::Parse { .. } | xmerge::Error::Io { .. } => "input error",
                    xmerge::Error::Alignment(_) => "alignment error",
                    xmerge::Error::Split(_) => "split error",
                    xmerge::Error::Fit(_) => "fit error",
                    xmerge::Error::Estimation(_) => "estimation error",
                    xmerge::Error::Shape(_) | xmerge::Error::Parameter(_) => "usage error",
                };
                write!(f, "{class}: {e}")
            }
        }
    }
}

impl From<xmerge::Error> for CliError {
    fn from(e: xmerge::Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "xmerge",
    version,
    about = "Merge gene-expression studies through estimated observation functions"
)]
pub struct Cli {
    /// Worker threads (falls back to XMERGE_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate observation functions and noise, and write adjusted matrices.
    Merge(MergeArgs),
    /// Split a matrix in two balanced subsets and distort each one.
    Simulate(SimulateArgs),
    /// Differential analysis of several datasets and call-set comparisons.
    Diff(DiffArgs),
    /// Coordinates of arrays on the first two normalized principal components.
    Pca(PcaArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Arrays' label table (first column array id).
    #[arg(long)]
    pub labels: Option<String>,
    /// Label column to use (default: the second column).
    #[arg(long)]
    pub label_column: Option<String>,
    /// Take log2 of input values.
    #[arg(long)]
    pub log2: bool,
    #[arg(long, conflicts_with = "log2")]
    pub no_log2: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input matrix (repeat for each study).
    #[arg(long = "input", short = 'i')]
    pub inputs: Vec<String>,
    /// Study id for each input, in order (default: file stem).
    #[arg(long = "study-id")]
    pub study_ids: Vec<String>,
    /// Spline penalty: `gcv` or a positive number; one value or one per study.
    #[arg(long)]
    pub lambda: Vec<LambdaArg>,
    #[arg(long)]
    pub invariant_bins: Option<usize>,
    #[arg(long)]
    pub invariant_fraction: Option<f64>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    #[arg(long)]
    pub max_inner_iters: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub deriv_floor: Option<f64>,
    #[arg(long)]
    pub variance_floor: Option<f64>,
    /// Added in quadrature to every estimated noise level.
    #[arg(long)]
    pub lambda_reg: Option<f64>,
    #[arg(long, conflicts_with = "no_damping")]
    pub damping: bool,
    #[arg(long)]
    pub no_damping: bool,
    /// Re-estimate observation functions and noise at every outer iteration.
    #[arg(long, conflicts_with = "no_refit_each_outer")]
    pub refit_each_outer: bool,
    #[arg(long)]
    pub no_refit_each_outer: bool,
    #[arg(long, conflicts_with = "no_balance_scale")]
    pub balance_scale: bool,
    #[arg(long)]
    pub no_balance_scale: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Base matrix; a synthetic one is generated when omitted.
    #[arg(long)]
    pub input: Option<String>,
    /// Genes of the synthetic base matrix.
    #[arg(long)]
    pub genes: Option<usize>,
    /// Differential genes of the synthetic base matrix.
    #[arg(long)]
    pub differential: Option<usize>,
    /// Conditions of the synthetic base matrix as `label:arrays`, comma
    /// separated.
    #[arg(long, value_delimiter = ',')]
    pub conditions: Vec<String>,
    #[arg(long)]
    pub effect_min: Option<f64>,
    #[arg(long)]
    pub effect_max: Option<f64>,
    /// Power exponent of each subset, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exponents: Vec<f64>,
    /// Noise multiplier of each subset, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub multipliers: Vec<f64>,
    #[arg(long)]
    pub noise_tune: Option<f64>,
    #[arg(long, conflicts_with = "no_standardize")]
    pub standardize: bool,
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset as `name=path` (repeat).
    #[arg(long = "input", short = 'i')]
    pub inputs: Vec<String>,
    #[arg(long)]
    pub group1: Option<String>,
    #[arg(long)]
    pub group2: Option<String>,
    /// Dataset the others are compared with (default: the first).
    #[arg(long)]
    pub reference: Option<String>,
    /// Extra call set intersecting two datasets, as `a+b` (repeat).
    #[arg(long)]
    pub intersect: Vec<String>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Fraction of least variable genes dropped before testing.
    #[arg(long)]
    pub filter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "input", short = 'i')]
    pub inputs: Vec<String>,
    #[arg(long = "study-id")]
    pub study_ids: Vec<String>,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse::<usize>().map_err(|_| {
                CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, found '{v}'"
                ))
            })?),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Usage("thread count must be positive".into()));
    }
    Ok(n)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Merge(a) => commands::merge(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Diff(a) => commands::diff(a),
        Command::Pca(a) => commands::pca(a),
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("xmerge: {e}");
            e.exit_code()
        }
    }
}
