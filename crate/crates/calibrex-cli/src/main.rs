//! `calibrex` command-line tool: evaluate calibration of a score file, export
//! reliability curves and diagrams, generate synthetic data, and run
//! estimator benchmarks.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod svg;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<calibrex::Error> for CliError {
    fn from(e: calibrex::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "calibrex",
    version,
    about = "Calibration metrics for probabilistic classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a calibration error from a score CSV
    Eval(EvalArgs),
    /// Export a reliability curve (optionally bootstrapped) as CSV/SVG
    Reliability(ReliabilityArgs),
    /// Export reliability-diagram points as CSV/SVG
    Diagram(DiagramArgs),
    /// Generate a synthetic Gaussian-mixture dataset
    Synth(SynthArgs),
    /// Run an estimator benchmark from a JSON config
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
pub struct EvalArgs {
    /// Score CSV file with header s_0,...,s_{C-1},label
    #[arg(long)]
    pub scores: PathBuf,
    /// Calibration setting: confidence, class-wise, or class:<index>
    #[arg(long, default_value = "confidence")]
    pub setting: String,
    /// Estimator: legacy, adaptive, convex, adaptive-convex, kde, or mce
    #[arg(long)]
    pub estimator: String,
    /// Bin count or "sqrt" (binned estimators; default sqrt)
    #[arg(long)]
    pub bins: Option<String>,
    /// Bandwidth or "auto" for Silverman's rule (kde; default auto)
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Emit the estimate as one JSON object
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct ReliabilityArgs {
    /// Score CSV file with header s_0,...,s_{C-1},label
    #[arg(long)]
    pub scores: PathBuf,
    /// Calibration setting: confidence or class:<index>
    #[arg(long, default_value = "confidence")]
    pub setting: String,
    /// Bandwidth or "auto" for Silverman's rule
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Bootstrap resamples; 0 disables uncertainty bands
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Band percentiles as "low,high"
    #[arg(long, default_value = "5,95")]
    pub band: String,
    /// Seed for the bootstrap resampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG chart path
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Keep every k-th grid row in the CSV
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

#[derive(Args)]
pub struct DiagramArgs {
    /// Score CSV file with header s_0,...,s_{C-1},label
    #[arg(long)]
    pub scores: PathBuf,
    /// Calibration setting: confidence or class:<index>
    #[arg(long, default_value = "confidence")]
    pub setting: String,
    /// Bin count or "sqrt"
    #[arg(long, default_value = "15")]
    pub bins: String,
    /// Binning scheme: uniform or adaptive
    #[arg(long, default_value = "uniform")]
    pub binning: String,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG chart path
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of classes
    #[arg(long)]
    pub classes: usize,
    /// Feature-space dimension
    #[arg(long)]
    pub dims: usize,
    /// Mixture modes per class
    #[arg(long, default_value_t = 4)]
    pub modes: usize,
    /// Number of samples to draw
    #[arg(long)]
    pub n: usize,
    /// Seed for spec and dataset sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset CSV path
    #[arg(long)]
    pub out: PathBuf,
    /// Output mixture-spec JSON path
    #[arg(long)]
    pub spec_out: PathBuf,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Benchmark config JSON
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for report, provenance, plots, and checkpoints
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse completed cell checkpoints from a previous run
    #[arg(long)]
    pub resume: bool,
    /// Worker threads (default: CALIBREX_WORKERS or all cores)
    #[arg(long)]
    pub workers: Option<usize>,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Eval(args) => commands::cmd_eval(&args),
        Command::Reliability(args) => commands::cmd_reliability(&args),
        Command::Diagram(args) => commands::cmd_diagram(&args),
        Command::Synth(args) => commands::cmd_synth(&args),
        Command::Benchmark(args) => commands::cmd_benchmark(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
