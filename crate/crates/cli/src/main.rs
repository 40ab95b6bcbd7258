//! `bellkit`: analyze, construct and simulate Bell-experiment models.
//!
//! Exit codes: 0 success, 1 parse error, 2 validation error, 3 CHSH bound
//! exceeded (analyze), 4 construction round-trip mismatch, 5 zero detection.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bellkit_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bellkit", version, about = "Exact hidden-variable models of Bell experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CHSH and no-signalling reports for a model or distribution file.
    Analyze(AnalyzeArgs),
    /// Build a setting-dependent hidden-variable model reproducing a target family.
    Construct(ConstructArgs),
    /// Draw trials from a model and estimate its correlations.
    Simulate(SimulateArgs),
    /// Tabulate the 16 deterministic local strategies and their CHSH values.
    EnumerateLhv(EnumerateArgs),
    /// Write the built-in detection-loophole model.
    Demo(OutputArgs),
    /// Law of the source hidden value given detection, for a ternary model.
    Posterior(PosteriorArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Model or distribution document (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Accept JSON numbers as probabilities; near-normalized groups are rescaled exactly.
    #[arg(long)]
    float_ingest: bool,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output path; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Settings law for lhv, model1 and model3 inputs (default uniform).
    #[arg(long)]
    settings: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Where to write the constructed model.
    #[arg(long)]
    output: PathBuf,
    /// Where to write the verification transcript; standard output if omitted.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    settings: Option<PathBuf>,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    /// Keep only trials where both outcomes are nonzero.
    #[arg(long)]
    postselect: bool,
    /// `json` writes the estimate report, `csv` the trial log.
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Also write the trial log (CSV) here.
    #[arg(long)]
    trial_log: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PosteriorArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    settings: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            _ if e.is_parse() => 1,
            Error::ZeroDetection => 5,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Construct(a) => commands::construct(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::EnumerateLhv(a) => commands::enumerate_lhv(a),
        Command::Demo(a) => commands::demo(a),
        Command::Posterior(a) => commands::posterior(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("bellkit: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
